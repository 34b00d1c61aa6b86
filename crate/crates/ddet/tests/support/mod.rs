//! Format checks shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use ddet::checkpoint::Checkpoint;
use ddet::config::RunConfig;
use ddet::sdd::{parse_line, parse_sdd_annotations, serialize_sdd};
use ddet_core::boxes::BBox;
use ddet_core::data::{GtObject, LabelMap};
use ddet_core::model::{DetectorConfig, Params};
use ddet_core::optim::SgdState;
use ddet_core::tensor::Tensor;

pub const SUBCOMMANDS: [&str; 6] = ["synth", "train", "eval", "detect", "bench", "cdf"];

/// Valid lines and the object each must produce.
pub fn sdd_valid_cases() -> Vec<(&'static str, u64, GtObject)> {
    let obj = |track_id, b: [f64; 4], class_id, lost, occluded, generated| GtObject {
        bbox: BBox::new(b[0], b[1], b[2], b[3]),
        class_id,
        track_id,
        lost,
        occluded,
        generated,
    };
    vec![
        (
            r#"0 1178 1085 1219 1127 8855 0 0 0 "Biker""#,
            8855,
            obj(0, [1178.0, 1085.0, 1219.0, 1127.0], 1, false, false, false),
        ),
        (
            r#"12 10 20 30 40 0 1 0 1 "Pedestrian""#,
            0,
            obj(12, [10.0, 20.0, 30.0, 40.0], 0, true, false, true),
        ),
        (
            "  3\t5 5 5 9 17 0 1 0   \"Cart\"  ",
            17,
            obj(3, [5.0, 5.0, 5.0, 9.0], 5, false, true, false),
        ),
        (
            r#"-1 0 0 1 1 2 0 0 0 "Bus""#,
            2,
            obj(-1, [0.0, 0.0, 1.0, 1.0], 4, false, false, false),
        ),
    ]
}

/// One line per malformed class with the exact message it must raise.
pub fn sdd_malformed_cases() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            r#"0 1 2 3 4 5 0 0 "Biker""#,
            "annotation line 7: expected 10 fields, found 9",
        ),
        (
            r#"0 1 2 3 4 5 0 0 0 0 "Biker""#,
            "annotation line 7: expected 10 fields, found 11",
        ),
        (
            "0 1 2 3 4 5 0 0 0 Biker",
            "annotation line 7: label is not double-quoted",
        ),
        (
            r#"0 1 2 3 4 5 0 0 0 "Bi"ker""#,
            "annotation line 7: label must be a single double-quoted string at the end of the line",
        ),
        (
            r#"0 1.5 2 3 4 5 0 0 0 "Biker""#,
            "annotation line 7: field 2 is not an integer: \"1.5\"",
        ),
        (
            r#"0 1 2 3 4 5 2 0 0 "Biker""#,
            "annotation line 7: lost must be 0 or 1, got 2",
        ),
        (
            r#"0 1 2 3 4 5 0 -1 0 "Biker""#,
            "annotation line 7: occluded must be 0 or 1, got -1",
        ),
        (
            r#"0 1 2 3 4 -5 0 0 0 "Biker""#,
            "annotation line 7: negative frame index -5",
        ),
        (
            r#"0 9 2 3 4 5 0 0 0 "Biker""#,
            "annotation line 7: box (9,2,3,4) has negative extent",
        ),
        (
            r#"0 1 2 3 4 5 0 0 0 "Truck""#,
            "annotation line 7: unknown label \"Truck\" (known labels: Pedestrian, Biker, Skater, Car, Bus, Cart)",
        ),
    ]
}

pub fn sdd_golden() -> Result<String, String> {
    let labels = LabelMap::sdd();
    let valid = sdd_valid_cases();
    for (text, frame, want) in &valid {
        let got = parse_line(text, 1, &labels).map_err(|e| format!("{text:?}: {e}"))?;
        if got != (*frame, want.clone()) {
            return Err(format!("{text:?} parsed as {got:?}"));
        }
    }
    let malformed = sdd_malformed_cases();
    for (text, want) in &malformed {
        match parse_line(text, 7, &labels) {
            Ok(v) => return Err(format!("{text:?} was accepted as {v:?}")),
            Err(e) if e.to_string() != *want => return Err(format!("{text:?}: got '{e}', want '{want}'")),
            Err(_) => {}
        }
    }
    // A whole file: blank lines skipped, errors carry the file line number.
    let file = "0 1 2 3 4 5 0 0 0 \"Biker\"\n\n1 1 2 3 4 5 0 0 0 \"Car\"\n2 0 0 1 1 0 0 0 0 \"Bus\"\n";
    let frames = parse_sdd_annotations(file, &labels).map_err(|e| e.to_string())?;
    let canon = serialize_sdd(frames.values(), &labels).map_err(|e| e.to_string())?;
    let want = "2 0 0 1 1 0 0 0 0 \"Bus\"\n0 1 2 3 4 5 0 0 0 \"Biker\"\n1 1 2 3 4 5 0 0 0 \"Car\"\n";
    if canon != want {
        return Err(format!("canonical form {canon:?}"));
    }
    match parse_sdd_annotations("0 1 2 3 4 5 0 0 0 \"Biker\"\n\nbad\n", &labels) {
        Err(e) if e.to_string() == "annotation line 3: expected 10 fields, found 1" => {}
        other => return Err(format!("file with a bad third line: {other:?}")),
    }
    Ok(format!(
        "{} valid lines, {} malformed classes",
        valid.len(),
        malformed.len()
    ))
}

/// Trained-looking checkpoint: f32 parameters plus optimizer state.
pub fn sample_checkpoint() -> Checkpoint {
    let det = DetectorConfig::new(3);
    let params = Params::<f32>::init(&det, 5).unwrap();
    let mut state = SgdState::new();
    for (name, t) in &params.tensors {
        state.velocity.insert(name.clone(), t.map(|v| v * 0.5 - 1e-3));
    }
    Checkpoint::from_training(&params, Some((&state, 1234)))
}

pub fn checkpoint_round_trip(dir: &Path) -> Result<String, String> {
    let ckpt = sample_checkpoint();
    let bytes = ckpt.encode().map_err(|e| e.to_string())?;
    let path = dir.join("round_trip.ddet");
    ckpt.save(&path).map_err(|e| e.to_string())?;
    let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
    if on_disk != bytes {
        return Err("saved file differs from encode()".into());
    }
    let back = Checkpoint::load(&path).map_err(|e| e.to_string())?;
    if back != ckpt {
        return Err("decoded checkpoint differs".into());
    }
    if back.encode().map_err(|e| e.to_string())? != bytes {
        return Err("re-encoded bytes differ".into());
    }
    let (state, step) = back.training_state().ok_or("optimizer state lost")?;
    if step != 1234 || back.params().tensors.len() != state.velocity.len() {
        return Err(format!("training state step {step}"));
    }
    // Mixed precision survives too.
    let mixed = Checkpoint {
        tensors: vec![
            (
                "a".into(),
                ddet::checkpoint::Stored::F64(Tensor::new(vec![2], vec![0.1, -3.5]).unwrap()),
            ),
            ("b".into(), ddet::checkpoint::Stored::F32(Tensor::scalar(7.0))),
        ],
    };
    let m = mixed.encode().map_err(|e| e.to_string())?;
    if Checkpoint::decode(&m)
        .map_err(|e| e.to_string())?
        .encode()
        .map_err(|e| e.to_string())?
        != m
    {
        return Err("mixed-precision checkpoint does not round-trip".into());
    }
    Ok(format!("{} tensors, {} bytes", ckpt.tensors.len(), bytes.len()))
}

pub fn config_round_trip() -> Result<String, String> {
    let text = "\
# desk run
[optim]
learning_rate = 0.02   # faster
steps = 300
seed = 9

[loss]
cls_mode = hard_negative_ce
gamma = 1.5

[anchors]
ratios = 0.5, 1, 2
scales = 1, 1.5

[data]
labels = Biker, Car
hflip = 0

[paths]
output_dir = runs/x
";
    let cfg = RunConfig::parse(text).map_err(|e| e.to_string())?;
    let canon = cfg.to_text();
    let back = RunConfig::parse(&canon).map_err(|e| e.to_string())?;
    if back != cfg {
        return Err("parsed canonical text differs".into());
    }
    if back.to_text() != canon {
        return Err("canonical text is not a fixed point".into());
    }
    let default = RunConfig::default();
    if RunConfig::parse(&default.to_text())
        .map_err(|e| e.to_string())?
        .to_text()
        != default.to_text()
    {
        return Err("default config does not round-trip".into());
    }
    Ok(format!("{} canonical lines", canon.lines().count()))
}

pub fn help_golden(bin: &Path, golden: &Path) -> Result<String, String> {
    let mut cases = vec![(vec!["--help".to_string()], "help.txt".to_string())];
    for c in SUBCOMMANDS {
        cases.push((vec![c.to_string(), "--help".to_string()], format!("help_{c}.txt")));
    }
    for (args, file) in &cases {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        let want = std::fs::read_to_string(golden.join(file)).map_err(|e| format!("{file}: {e}"))?;
        if !out.status.success() {
            return Err(format!("{args:?} exited with {}", out.status));
        }
        if String::from_utf8_lossy(&out.stdout) != want {
            return Err(format!("{args:?} differs from {file}"));
        }
    }
    Ok(format!("{} help texts", cases.len()))
}
