//! Replays the fuzz corpus, plus random byte mutations of it, through the
//! same properties the fuzz targets assert. Runs on a stable toolchain.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varmech_cli::expr::Env;
use varmech_cli::{parse_expr, ProblemSpec, Table};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(!paths.is_empty());
    paths.into_iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn mutants(seeds: &[Vec<u8>], count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = b"qyput0123456789.,+-*/^()= \n#[]\"esincoaxplrtbh";
    (0..count)
        .map(|_| {
            let mut s = seeds[rng.random_range(0..seeds.len())].clone();
            for _ in 0..rng.random_range(1..4) {
                let c = alphabet[rng.random_range(0..alphabet.len())];
                match rng.random_range(0..3) {
                    0 if !s.is_empty() => {
                        let i = rng.random_range(0..s.len());
                        s.remove(i);
                    }
                    1 if !s.is_empty() => {
                        let i = rng.random_range(0..s.len());
                        s[i] = c;
                    }
                    _ => {
                        let i = rng.random_range(0..=s.len());
                        s.insert(i, c);
                    }
                }
            }
            s
        })
        .collect()
}

fn expr_property(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_expr(text) {
        Ok(e) => {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap_or_else(|err| panic!("'{text}' -> '{printed}': {err}"));
            let env = Env {
                t: 0.5,
                h: 0.1,
                q: &[0.3, -0.7, 1.1],
                y: &[0.2, 0.9, -0.4],
                p: &[0.6],
                u: &[-0.1],
            };
            let (a, b) = (e.eval(&env), back.eval(&env));
            assert!(
                a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "'{text}'"
            );
        }
        Err(err) => assert!(err.pos <= text.len(), "'{text}': {err}"),
    }
}

#[test]
fn expression_seeds_and_mutants() {
    let s = seeds("parse_expr");
    for data in s.iter().chain(&mutants(&s, 5000, 1)) {
        expr_property(data);
    }
}

#[test]
fn spec_seeds_and_mutants() {
    let s = seeds("parse_spec");
    for data in &s {
        ProblemSpec::parse(std::str::from_utf8(data).unwrap()).expect("catalog seed parses");
    }
    for data in mutants(&s, 3000, 2) {
        if let Ok(text) = std::str::from_utf8(&data) {
            let _ = ProblemSpec::parse(text);
        }
    }
}

#[test]
fn csv_seeds_and_mutants() {
    let s = seeds("read_csv");
    for data in s.iter().chain(&mutants(&s, 3000, 3)) {
        if let Ok(table) = Table::read(data.as_slice()) {
            let back = Table::read(table.to_csv_string().as_bytes()).expect("written table reads back");
            assert_eq!(back.header.len(), table.header.len());
            assert_eq!(back.rows.len(), table.rows.len());
        }
    }
}
