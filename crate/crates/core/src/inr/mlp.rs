/// Dense layer `z = a · W + b`. `weights` is `inputs × outputs` row-major,
/// so row `i` holds the fan-out of input `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.outputs + output]
    }

    /// `z = a · W + b` for every row of `a` (`rows × inputs`).
    pub(crate) fn forward_rows(&self, a: &[f64], z: &mut [f64]) {
        let (ni, no) = (self.inputs, self.outputs);
        for (arow, zrow) in a.chunks_exact(ni).zip(z.chunks_exact_mut(no)) {
            zrow.copy_from_slice(&self.biases);
            for (i, &ai) in arow.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let wrow = &self.weights[i * no..(i + 1) * no];
                for (zj, wj) in zrow.iter_mut().zip(wrow) {
                    *zj += ai * wj;
                }
            }
        }
    }

    /// `Wᵀ` as `outputs × inputs` row-major.
    pub(crate) fn transposed(&self) -> Vec<f64> {
        let (ni, no) = (self.inputs, self.outputs);
        let mut t = vec![0.0; ni * no];
        for i in 0..ni {
            for j in 0..no {
                t[j * ni + i] = self.weights[i * no + j];
            }
        }
        t
    }
}

/// Accumulates `dW += aᵀ · dz`, `db += Σ_rows dz` and, when requested,
/// `da = dz · Wᵀ` for a block of rows.
pub(crate) fn backward_rows(
    layer_t: &[f64],
    inputs: usize,
    outputs: usize,
    a: &[f64],
    dz: &[f64],
    grad: &mut Layer,
    mut da: Option<&mut [f64]>,
) {
    for (row, (arow, dzrow)) in a.chunks_exact(inputs).zip(dz.chunks_exact(outputs)).enumerate() {
        for (b, d) in grad.biases.iter_mut().zip(dzrow) {
            *b += d;
        }
        for (i, &ai) in arow.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let grow = &mut grad.weights[i * outputs..(i + 1) * outputs];
            for (g, d) in grow.iter_mut().zip(dzrow) {
                *g += ai * d;
            }
        }
        if let Some(da) = da.as_deref_mut() {
            let darow = &mut da[row * inputs..(row + 1) * inputs];
            darow.iter_mut().for_each(|v| *v = 0.0);
            for (j, &dj) in dzrow.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let trow = &layer_t[j * inputs..(j + 1) * inputs];
                for (v, t) in darow.iter_mut().zip(trow) {
                    *v += dj * t;
                }
            }
        }
    }
}

pub(crate) fn relu_in_place(z: &[f64], a: &mut [f64]) {
    for (ai, &zi) in a.iter_mut().zip(z) {
        *ai = if zi > 0.0 { zi } else { 0.0 };
    }
}

/// Zeroes `grad` where the pre-activation was not strictly positive.
pub(crate) fn relu_backward(z: &[f64], grad: &mut [f64]) {
    for (g, &zi) in grad.iter_mut().zip(z) {
        if zi <= 0.0 {
            *g = 0.0;
        }
    }
}
