//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vif_core::physio::{Sample, Scenario};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn read_corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every `.vif` script in the corpus, sorted by name.
pub fn corpus_scripts() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "vif"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// Offline deep-cycle count. Boundaries first (rise above `hi`, dip below
/// `lo`, next rise above `hi`), then each cycle's amplitude over the slice
/// of samples it covers, excluding the closing sample.
pub fn oracle_deep_cycles(values: &[f64], hi: f64, lo: f64, deep: f64) -> u32 {
    let v: Vec<f64> = values.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let Some(mut start) = v.iter().position(|&x| x > hi) else {
        return 0;
    };
    let mut deep_cycles = 0;
    while let Some(end) = (start + 1..v.len())
        .find(|&i| v[i] < lo)
        .and_then(|dip| (dip + 1..v.len()).find(|&i| v[i] > hi))
    {
        let slice = &v[start..end];
        let max = slice.iter().cloned().fold(f64::MIN, f64::max);
        let min = slice.iter().cloned().fold(f64::MAX, f64::min);
        if max - min >= deep {
            deep_cycles += 1;
        }
        start = end;
    }
    deep_cycles
}

/// A random but valid simulator scenario.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = rng.random_range(20_000..60_000u64);
    let mut lines = vec![
        format!(
            r#"{{"at":0,"cmd":"set","key":"breath.rate","val":{}}}"#,
            rng.random_range(6.0..30.0f64)
        ),
        format!(
            r#"{{"at":0,"cmd":"set","key":"breath.amplitude","val":{}}}"#,
            rng.random_range(0.05..0.5f64)
        ),
        format!(
            r#"{{"at":0,"cmd":"set","key":"heart.jitter","val":{}}}"#,
            rng.random_range(0.0..50.0f64)
        ),
    ];
    let mut at = 0;
    for _ in 0..rng.random_range(0..6) {
        at += rng.random_range(0..end / 4);
        if at >= end {
            break;
        }
        if rng.random_bool(0.5) {
            lines.push(format!(r#"{{"at":{at},"cmd":"deepbreath","n":{}}}"#, rng.random_range(1..5)));
        } else {
            lines.push(format!(
                r#"{{"at":{at},"cmd":"set","key":"breath.rate","val":{}}}"#,
                rng.random_range(4.0..40.0f64)
            ));
        }
    }
    lines.push(format!(r#"{{"at":{end},"cmd":"end"}}"#));
    Scenario::parse(&lines.join("\n")).expect("generated scenario is valid")
}

pub fn breath_values(samples: &[Sample], src: &str) -> Vec<f64> {
    samples
        .iter()
        .filter(|s| s.sig == "breath" && s.src == src)
        .filter_map(|s| s.v)
        .collect()
}

/// Byte positions of every jump target in a script line: the token after
/// `goto:` and the last field of an `ex:` directive.
pub fn target_sites(line: &str) -> Vec<(usize, usize)> {
    let mut sites = Vec::new();
    for (pos, _) in line.match_indices("goto:") {
        let start = pos + "goto:".len();
        let len = line[start..]
            .find(|c: char| c == ':' || c.is_whitespace())
            .unwrap_or(line.len() - start);
        if len > 0 {
            sites.push((start, start + len));
        }
    }
    if let Some(ex) = line.trim_start().strip_prefix("ex:") {
        let offset = line.len() - ex.len();
        let token_end = ex.find(char::is_whitespace).unwrap_or(ex.len());
        if let Some(colon) = ex[..token_end].rfind(':') {
            sites.push((offset + colon + 1, offset + token_end));
        }
    }
    sites.sort();
    sites
}

/// Single-token target mutations of a script: (mutated source, 1-based line).
pub fn target_mutations(source: &str) -> Vec<(String, u32)> {
    let lines: Vec<&str> = source.lines().collect();
    let mut out = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        for (start, end) in target_sites(line) {
            let mutated_line = format!("{}{}zz{}", &line[..start], &line[start..end], &line[end..]);
            let mut copy: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
            copy[idx] = mutated_line;
            out.push((copy.join("\n") + "\n", idx as u32 + 1));
        }
    }
    out
}
