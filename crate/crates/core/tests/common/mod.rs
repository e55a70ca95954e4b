//! Independent oracles and synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use lscd::corpus::{read_usages, Period};
use lscd::embeddings::{write_embedding_file, LayerEmbeddingSet, LayeredUsage};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng) -> f64 {
    (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn below(r: &mut ChaCha8Rng, n: usize) -> usize {
    (r.next_u64() % n as u64) as usize
}

/// Random vector with components in [-1, 1), never all-zero.
pub fn random_vector(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * uniform(r) - 1.0).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            return v;
        }
    }
}

pub fn random_set(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| random_vector(r, dim)).collect()
}

/// Plain double loop, separate norms, naive summation.
pub fn oracle_apd(v: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for a in v {
        for b in w {
            let mut d = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for i in 0..a.len() {
                d += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            total += 1.0 - d / (na.sqrt() * nb.sqrt());
        }
    }
    total / (v.len() * w.len()) as f64
}

pub fn oracle_centroid_cos(v: &[Vec<f64>], w: &[Vec<f64>]) -> f64 {
    let mean = |s: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; s[0].len()];
        for x in s {
            for (i, c) in x.iter().enumerate() {
                m[i] += c;
            }
        }
        m.iter().map(|c| c / s.len() as f64).collect()
    };
    let (a, b) = (mean(v), mean(w));
    let d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - d / (na * nb)
}

/// Ranks by counting: 1 + #smaller + (#equal − 1)/2.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let less = x.iter().filter(|&&xj| xj < xi).count() as f64;
            let equal = x.iter().filter(|&&xj| xj == xi).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Pearson via raw sums on the counting ranks.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as f64;
    let sx: f64 = rx.iter().sum();
    let sy: f64 = ry.iter().sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|a| a * a).sum();
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Top-k by repeated max extraction (smallest name wins ties).
pub fn oracle_top_k(scores: &[(String, f64)], k: usize) -> BTreeSet<String> {
    let mut pool = scores.to_vec();
    let mut out = BTreeSet::new();
    for _ in 0..k {
        let mut best = 0;
        for i in 1..pool.len() {
            if pool[i].1 > pool[best].1 || (pool[i].1 == pool[best].1 && pool[i].0 < pool[best].0) {
                best = i;
            }
        }
        out.insert(pool.remove(best).0);
    }
    out
}

pub fn target_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:02}")).collect()
}

/// Corpus text where each target occurs `per_target` times, one sentence per
/// occurrence, with filler sentences in between.
pub fn corpus_text(targets: &[String], per_target: usize, seed: u64) -> String {
    let mut r = rng(seed);
    let filler = ["il", "la", "di", "che", "e", "un", "per", "non"];
    let mut sentences = Vec::new();
    for round in 0..per_target {
        for t in targets {
            let mut s = String::new();
            let before = below(&mut r, 4);
            for _ in 0..before {
                let f = filler[below(&mut r, filler.len())];
                let _ = writeln!(s, "{f}\t{f}\tDET");
            }
            let surface = if round % 5 == 0 { capitalise(t) } else { t.clone() };
            let _ = writeln!(s, "{surface}\t{t}\tNOUN");
            let _ = writeln!(s, ".\t.\tPUNCT");
            sentences.push(s);
            if below(&mut r, 3) == 0 {
                sentences.push("ieri\tieri\tADV\n.\t.\tPUNCT\n".to_owned());
            }
        }
    }
    sentences.join("\n")
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Stand-in for the external encoder: reads a usage dump and writes an
/// embedding file with one vector per layer. Usages of `changed` targets in t2
/// draw half their vectors from a second sense direction.
pub fn fake_encode(dump: &Path, out: &Path, changed: bool, dim: usize, layers: usize) {
    let file = std::fs::File::open(dump).unwrap();
    let usages = read_usages(std::io::BufReader::new(file)).unwrap();
    let first = usages.first().expect("non-empty dump");
    let (target, period) = (first.target.clone(), first.period);
    let seed_of = |s: &str| s.bytes().fold(17u64, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
    let mut sense_rng = rng(seed_of(&target));
    let senses = [random_vector(&mut sense_rng, dim), random_vector(&mut sense_rng, dim)];
    let mut set_usages = Vec::new();
    for (i, u) in usages.iter().enumerate() {
        let key = u.key();
        let mut r = rng(seed_of(&key));
        let sense = usize::from(changed && period == Period::T2 && i % 2 == 0);
        let layers_map = (1..=layers)
            .map(|l| {
                let v: Vec<f32> = senses[sense]
                    .iter()
                    .map(|c| (c + 0.15 * (2.0 * uniform(&mut r) - 1.0) + 0.01 * l as f64) as f32)
                    .collect();
                (l, v)
            })
            .collect();
        set_usages.push(LayeredUsage { key, layers: layers_map });
    }
    let set = LayerEmbeddingSet::new(target, period, dim, layers, set_usages).unwrap();
    let mut buf = Vec::new();
    write_embedding_file(&mut buf, &set).unwrap();
    std::fs::write(out, buf).unwrap();
}
