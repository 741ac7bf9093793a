//! Runs the `stinr` binary end to end on a small problem.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stinr::io::ArrayContainer;

const CONFIG: &str = r#"
seed = 3

[phantom]
n = 16
frames = 4
coils = 2

[trajectory]
spokes_per_frame = 5

[encoder]
levels = 4
log2_table_size = 10

[mlp]
hidden_layers = 2
hidden_width = 16

[recon]
lambda_s = 0.001
lambda_l = 0.001
epochs = 4

[sweep]
lambda_s = [0.0, 0.01]
lambda_l = [0.0]
"#;

fn stinr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stinr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_recon_superres_eval_render() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let sim = tmp.path().join("sim");
    let out = stinr(&["simulate", "--config", &cfg, "--out", &s(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(sim.join("manifest.json")).unwrap()).unwrap();
    let kspace = ArrayContainer::read(&sim.join("kspace.arr")).unwrap();
    assert_eq!(manifest["shapes"]["kspace"], serde_json::json!(kspace.shape));
    assert_eq!(kspace.shape, vec![2, 4, 5, 32]);
    assert_eq!(manifest["acceleration_factor"]["value"], "3.2");

    // same seed, same bytes
    let files = ["kspace.arr", "coils.arr", "trajectory.arr", "truth.arr", "manifest.json"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(sim.join(f)).unwrap()).collect();
    assert!(stinr(&["simulate", "--config", &cfg, "--out", &s(&sim)]).status.success());
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&fs::read(sim.join(f)).unwrap(), bytes, "{f}");
    }

    let rec = tmp.path().join("rec");
    let out = stinr(&["recon", "--config", &cfg, "--out", &s(&rec), "--deterministic", "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["checkpoint.ckpt", "recon.arr", "loss.csv", "metrics.csv", "manifest.json", "recon_yt_x008.pgm"] {
        assert!(rec.join(f).exists(), "{f} missing");
    }
    assert_eq!(fs::read_dir(rec.join("frames")).unwrap().count(), 4);

    let up = tmp.path().join("up");
    let out = stinr(&["superres", "--checkpoint", &s(&rec.join("checkpoint.ckpt")), "--factor", "4", "--out", &s(&up)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let arr = ArrayContainer::read(&up.join("superres_x4.arr")).unwrap();
    assert_eq!(arr.shape, vec![4 + 3 * 3, 16, 16]);

    let ev = tmp.path().join("eval");
    let truth = s(&rec.join("truth.arr"));
    let out = stinr(&["eval", "--recon", &truth, "--truth", &truth, "--out", &s(&ev)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(ev.join("metrics.csv")).unwrap();
    assert!(csv.contains("frame,0,9.9e1,1e0"), "{csv}");

    let rd = tmp.path().join("render");
    let out = stinr(&["render", "--input", &truth, "--column", "8", "--out", &s(&rd)]);
    assert!(out.status.success());
    assert_eq!(fs::read_dir(rd.join("frames")).unwrap().count(), 4);
    let yt = fs::read(rd.join("truth_yt_x008.pgm")).unwrap();
    assert!(yt.starts_with(b"P5\n4 16\n255\n"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(rd.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["window"]["max"].as_f64().unwrap() > 0.0);
}

#[test]
fn recon_from_external_dataset_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let sim = tmp.path().join("sim");
    assert!(stinr(&["simulate", "--config", &cfg, "--out", &s(&sim)]).status.success());
    let ext = format!("{CONFIG}").replace("coils = 2\n", &format!("coils = 2\ndataset = {:?}\n", s(&sim)));
    let cfg2 = tmp.path().join("ext.toml");
    fs::write(&cfg2, ext).unwrap();
    let out = stinr(&["recon", "--config", &s(&cfg2), "--out", &s(&tmp.path().join("rec"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let sw = tmp.path().join("sweep");
    let out = stinr(&["sweep", "--config", &cfg, "--out", &s(&sw)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(sw.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains(",true,"));
}

#[test]
fn exit_codes_and_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "[recon]\nlambda_s = 0.1\nlambda_l = 0.1\nlamda = 2\n");
    let out = stinr(&["recon", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=config code=2"));
    assert!(err.contains("line 4") && err.contains("lamda"), "{err}");

    let out = stinr(&["superres", "--checkpoint", &s(&tmp.path().join("missing.ckpt"))]);
    assert_eq!(out.status.code(), Some(3));

    let junk = tmp.path().join("junk.arr");
    fs::write(&junk, b"not an array").unwrap();
    let out = stinr(&["render", "--input", &s(&junk), "--out", &s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind=format"));

    // numerical blow-up: a huge learning rate drives the loss non-finite
    let blow = write_config(
        tmp.path(),
        &CONFIG.replace("epochs = 4", "epochs = 30\nlr = 1e300"),
    );
    let out = stinr(&["recon", "--config", &blow, "--out", &s(&tmp.path().join("b"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
