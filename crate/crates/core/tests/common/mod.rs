//! Random program generators shared by the property and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;

use mgale_core::symbolic::Rational;

pub fn program_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs").join(name)
}

pub fn params(kv: &[(&str, i64, i64)]) -> BTreeMap<String, Rational> {
    kv.iter().map(|(k, n, d)| (k.to_string(), Rational::new((*n).into(), (*d).into()))).collect()
}

fn coef<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    rng.random_range(lo..=hi)
}

/// `c1*a + c2*b + ...` with zero terms dropped; `0` if all vanish.
fn lin(terms: &[(i64, &str)], constant: i64) -> String {
    let mut parts: Vec<String> = terms
        .iter()
        .filter(|(c, _)| *c != 0)
        .map(|(c, v)| if *c == 1 { v.to_string() } else { format!("{c}*{v}") })
        .collect();
    if constant != 0 || parts.is_empty() {
        parts.push(constant.to_string());
    }
    parts.join(" + ").replace("+ -", "- ")
}

fn bern<R: Rng>(rng: &mut R) -> String {
    let d = rng.random_range(2..=9);
    let n = rng.random_range(1..d);
    format!("Bern({n}/{d}, {{{}, {}}})", coef(rng, -3, 3), coef(rng, -3, 3))
}

/// A first-order linear loop over `x` and `y` driven by two Bernoulli
/// samples, and a random linear seed.
pub fn linear_program<R: Rng>(rng: &mut R) -> (String, String) {
    let x = lin(
        &[(coef(rng, -2, 2), "x[-1]"), (coef(rng, -2, 2), "y[-1]"), (coef(rng, -2, 2), "z"), (coef(rng, -1, 1), "w")],
        coef(rng, -3, 3),
    );
    let y = lin(
        &[(coef(rng, -2, 2), "x[-1]"), (coef(rng, -2, 2), "y[-1]"), (coef(rng, -1, 1), "z"), (coef(rng, -2, 2), "w")],
        coef(rng, -3, 3),
    );
    let src = format!(
        "x[0] := {};\ny[0] := {};\nwhile (x < 1000) do\n    z ~ {};\n    w ~ {};\n    x := {x};\n    y := {y};\nend\n",
        coef(rng, -5, 5),
        coef(rng, -5, 5),
        bern(rng),
        bern(rng)
    );
    let seed = lin(&[(coef(rng, -3, 3), "x"), (coef(rng, -3, 3), "y")], coef(rng, -2, 2));
    (src, seed)
}

fn zero_mean<R: Rng>(rng: &mut R) -> String {
    match rng.random_range(0..3) {
        0 => {
            let v = rng.random_range(1..=3);
            format!("Bern(1/2, {{{}, {v}}})", -v)
        }
        1 => {
            let k = rng.random_range(1..=2);
            format!("Unif{{{}}}", (-k..=k).map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
        }
        _ => {
            // p*a = (1-p)*b with p = b/(a+b)
            let (a, b) = (rng.random_range(1..=3), rng.random_range(1..=3));
            format!("Bern({b}/{}, {{{a}, {}}})", a + b, -b)
        }
    }
}

/// A loop whose two walks have independent zero-mean steps, so every
/// polynomial in `x` and `y` of degree at most one in each is a
/// martingale. Returns the program and such a seed.
pub fn martingale_program<R: Rng>(rng: &mut R) -> (String, String) {
    let src = format!(
        "x[0] := {};\ny[0] := {};\nwhile (x < 100) do\n    z ~ {};\n    w ~ {};\n    x := x[-1] + {};\n    y := y[-1] + {};\nend\n",
        coef(rng, -5, 5),
        coef(rng, -5, 5),
        zero_mean(rng),
        zero_mean(rng),
        lin(&[(coef(rng, 1, 3), "z")], 0),
        lin(&[(coef(rng, 1, 3), "w")], 0),
    );
    let seed = lin(&[(coef(rng, -3, 3), "x"), (coef(rng, -3, 3), "y"), (coef(rng, -2, 2), "x*y")], coef(rng, -2, 2));
    (src, seed)
}

fn any_dist<R: Rng>(rng: &mut R) -> String {
    match rng.random_range(0..4) {
        0 => bern(rng),
        1 => format!("Unif{{{}, {}, {}}}", coef(rng, -3, 0), coef(rng, 1, 2), coef(rng, 3, 5)),
        2 => format!("Table{{({}) -> 1/3, ({}) -> 2/3}}", coef(rng, -2, 2), coef(rng, 3, 4)),
        _ => "Matches(\"ABA\", 3)".to_string(),
    }
}

fn sample_ref(dist: &str, name: &str, k: u32) -> String {
    if dist.starts_with("Matches") {
        format!("pi_{}({name})", 1 + k % 3)
    } else if dist.starts_with("Table") {
        format!("pi_1({name})")
    } else {
        name.to_string()
    }
}

/// A loop with second-order history, products and a mix of distributions.
pub fn mixed_program<R: Rng>(rng: &mut R) -> String {
    let (dz, dw) = (any_dist(rng), any_dist(rng));
    let (z, w) = (sample_ref(&dz, "z", rng.random_range(0..3)), sample_ref(&dw, "w", rng.random_range(0..3)));
    let x = format!(
        "{} + {}*{z}*y[-1] + {}",
        lin(&[(coef(rng, -2, 2), "x[-1]"), (coef(rng, -1, 1), "x[-2]")], coef(rng, -2, 2)),
        coef(rng, -1, 1),
        lin(&[(coef(rng, -2, 2), &w)], 0),
    );
    let y = format!(
        "{} + x*{}",
        lin(&[(coef(rng, -1, 1), "y[-1]"), (coef(rng, -2, 2), &z)], coef(rng, -2, 2)),
        coef(rng, -1, 1)
    );
    format!(
        "x[0] := {};\nx[1] := {};\ny[0] := 0;\ny[1] := {};\nwhile (x < 1000000) do\n    z ~ {dz};\n    w ~ {dw};\n    x := {x};\n    y := {y};\nend\n",
        coef(rng, -3, 3),
        coef(rng, -3, 3),
        coef(rng, -3, 3),
    )
}
