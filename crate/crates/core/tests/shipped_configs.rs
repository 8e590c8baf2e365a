//! Every shipped config parses, and every shipped experiment passes its
//! sample-accuracy comparison.

use std::fs;
use std::path::PathBuf;

use adacov::config::{parse_domain, parse_experiment, parse_instance};
use adacov::harness::{compare_bound, run_experiment, verify_instance};

fn configs() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn every_config_loads_as_something() {
    let all = configs();
    assert!(all.len() >= 5);
    for (name, text) in &all {
        let ok = parse_experiment(text).is_ok() || parse_instance(text).is_ok() || parse_domain(text).is_ok();
        assert!(ok, "{name} does not parse");
    }
}

#[test]
fn experiments_pass_on_sample_tails() {
    let mut seen = 0;
    for (name, text) in configs() {
        let Ok(cfg) = parse_experiment(&text) else { continue };
        seen += 1;
        let res = run_experiment(&cfg).unwrap();
        let v = compare_bound(&res);
        for row in &v.rows {
            assert!(row.sample.pass || !row.sample.valid, "{name}: sample FAIL at alpha={}", row.alpha);
        }
        assert!(v.pass, "{name}: overall verdict FAIL");
    }
    assert!(seen >= 3);
}

#[test]
fn instances_verify() {
    for (name, text) in configs() {
        let Ok(cfg) = parse_instance(&text) else { continue };
        assert!(verify_instance(&cfg).unwrap().pass, "{name}");
    }
}
