//! Built-in metric catalog.
//!
//! Every entry is stored as metric-file text (see [`crate::metricfile`]) so
//! catalog metrics and user files travel through exactly the same code path.
//! Spherical entries use the rational polar coordinate `z = cos θ`, which
//! keeps all non-rescaled metrics exactly evaluable.
//!
//! Families:
//! - `flat<n>` (n = 4..8): Minkowski space; zero Weyl tensor.
//! - `schwarzschild4`, `tangherlini<n>` (n = 5, 6): static vacuum black
//!   holes, `f = 1 − 2m/r^{n−3}`.
//! - `desitter<n>` (n = 4..6): black hole with a cosmological term,
//!   `f = 1 − 2m/r^{n−3} − r²/100`; Einstein but not Ricci-flat.
//! - `product2sphere<n>` (n = 4..6): unit 2-sphere × flat factor; a
//!   homogeneous space that is not Einstein and not conformally Einstein.
//! - `perturbed4`: `f = 1 − 2/r + 1/(4r²)`; close to vacuum but not
//!   conformally Einstein.
//! - For each base entry, `<name>_exp` and `<name>_poly` apply the conformal
//!   factors `omega = exp(2c)` and `omega = 1 + c²/10`, where `c` is the
//!   radial (or first spatial) coordinate.

use crate::error::{Error, Result};
use crate::metricfile::MetricFile;

/// One catalog metric, stored as metric-file text.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub text: String,
}

impl CatalogEntry {
    pub fn metric_file(&self) -> Result<MetricFile> {
        MetricFile::parse(&self.text)
    }
}

fn entry(name: String, description: String, text: String) -> CatalogEntry {
    CatalogEntry {
        name,
        description,
        text,
    }
}

fn points_section(points: &[(&str, Vec<String>)]) -> String {
    let mut out = String::from("\n[points]\n");
    for (label, coords) in points {
        out.push_str(&format!("{label} = {}\n", coords.join(", ")));
    }
    out
}

fn flat(n: usize) -> CatalogEntry {
    let coords: Vec<String> = std::iter::once("t".to_string())
        .chain((1..n).map(|i| format!("x{i}")))
        .collect();
    let mut text = format!(
        "[metric]\ndimension = {n}\ncoordinates = {}\n\n[components]\ng 0 0 = -1\n",
        coords.join(", ")
    );
    for i in 1..n {
        text.push_str(&format!("g {i} {i} = 1\n"));
    }
    let pts: Vec<(&str, Vec<String>)> = vec![
        ("p0", (0..n).map(|i| format!("{i}")).collect()),
        ("p1", (0..n).map(|i| format!("{}", i as i64 - 1)).collect()),
        ("p2", (0..n).map(|i| format!("1/{}", i + 2)).collect()),
    ];
    text.push_str(&points_section(&pts));
    entry(
        format!("flat{n}"),
        format!("{n}d Minkowski space (zero Weyl tensor)"),
        text,
    )
}

/// Static spherically symmetric metric
/// `−f dt² + dr²/f + r² dΩ²_{n−2}` in rational sphere coordinates.
fn spherical(name: &str, n: usize, f: &str, param_m: bool, description: &str) -> CatalogEntry {
    let mut coords = vec!["t".to_string(), "r".to_string()];
    let n_z = n - 3; // polar coordinates z1..z_{n-3}, then the azimuth phi
    if n_z == 1 {
        coords.push("z".to_string());
    } else {
        coords.extend((1..=n_z).map(|i| format!("z{i}")));
    }
    coords.push("phi".to_string());
    let zname = |k: usize| -> String {
        if n_z == 1 {
            "z".to_string()
        } else {
            format!("z{}", k + 1)
        }
    };
    let mut text = format!(
        "[metric]\ndimension = {n}\ncoordinates = {}\n\n[components]\ng 0 0 = -({f})\ng 1 1 = 1/({f})\n",
        coords.join(", ")
    );
    // nested round metric on S^{n-2}: each polar slot divides by its own
    // (1 - z_k^2) and multiplies the (1 - z_i^2) of the slots before it
    for k in 0..n_z {
        let mut factors = vec!["r^2".to_string()];
        for i in 0..k {
            factors.push(format!("(1 - {}^2)", zname(i)));
        }
        let slot = 2 + k;
        text.push_str(&format!(
            "g {slot} {slot} = {}/(1 - {}^2)\n",
            factors.join("*"),
            zname(k)
        ));
    }
    let mut factors = vec!["r^2".to_string()];
    for i in 0..n_z {
        factors.push(format!("(1 - {}^2)", zname(i)));
    }
    text.push_str(&format!("g {} {} = {}\n", n - 1, n - 1, factors.join("*")));
    if param_m {
        text.push_str("\n[params]\nm = 1\n");
    }
    let mut pts: Vec<(&str, Vec<String>)> = Vec::new();
    for (label, r) in [("p0", 3), ("p1", 4), ("p2", 5)] {
        let mut c = vec!["0".to_string(), r.to_string()];
        for k in 0..n_z {
            c.push(format!("1/{}", 2 * k + 3)); // z = 1/3, 1/5, ...
        }
        c.push("0".to_string());
        pts.push((label, c));
    }
    text.push_str(&points_section(&pts));
    entry(name.to_string(), description.to_string(), text)
}

/// Product of the unit 2-sphere with a flat Lorentz factor.
fn product2sphere(n: usize) -> CatalogEntry {
    let mut coords = vec!["t".to_string()];
    coords.extend((1..n - 2).map(|i| format!("x{i}")));
    coords.push("z".to_string());
    coords.push("phi".to_string());
    let mut text = format!(
        "[metric]\ndimension = {n}\ncoordinates = {}\n\n[components]\ng 0 0 = -1\n",
        coords.join(", ")
    );
    for i in 1..n - 2 {
        text.push_str(&format!("g {i} {i} = 1\n"));
    }
    text.push_str(&format!("g {} {} = 1/(1 - z^2)\n", n - 2, n - 2));
    text.push_str(&format!("g {} {} = 1 - z^2\n", n - 1, n - 1));
    let mut pts: Vec<(&str, Vec<String>)> = Vec::new();
    for (label, k) in [("p0", 1i64), ("p1", 2), ("p2", 3)] {
        let mut c = vec!["0".to_string()];
        c.extend((1..n - 2).map(|i| format!("{}", k * i as i64)));
        c.push(format!("1/{}", 2 * k + 1));
        c.push("0".to_string());
        pts.push((label, c));
    }
    text.push_str(&points_section(&pts));
    entry(
        format!("product2sphere{n}"),
        format!("unit 2-sphere x {}d flat factor (not conformally Einstein)", n - 2),
        text,
    )
}

/// The two standard conformal variants of a base entry.
fn variants(base: &CatalogEntry, coord: &str) -> Vec<CatalogEntry> {
    let make = |suffix: &str, omega: String| -> CatalogEntry {
        entry(
            format!("{}_{suffix}", base.name),
            format!("{}, rescaled by omega = {omega}", base.description),
            format!("{}\n[conformal]\nomega = {omega}\n", base.text),
        )
    };
    vec![
        make("exp", format!("exp(2*{coord})")),
        make("poly", format!("1 + {coord}^2/10")),
    ]
}

/// All built-in metrics, bases first, then their conformal variants.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut bases: Vec<(CatalogEntry, &str)> = Vec::new();
    for n in 4..=8 {
        bases.push((flat(n), "x1"));
    }
    bases.push((
        spherical(
            "schwarzschild4",
            4,
            "1 - 2*m/r",
            true,
            "4d static vacuum black hole",
        ),
        "r",
    ));
    for n in [5, 6] {
        let f = format!("1 - 2*m/r^{}", n - 3);
        let desc = format!("{n}d static vacuum black hole");
        bases.push((
            spherical(&format!("tangherlini{n}"), n, &f, true, &desc),
            "r",
        ));
    }
    for n in 4..=6 {
        let f = if n == 4 {
            "1 - 2*m/r - r^2/100".to_string()
        } else {
            format!("1 - 2*m/r^{} - r^2/100", n - 3)
        };
        let desc = format!("{n}d black hole with cosmological term (Einstein, nonzero Ricci)");
        bases.push((
            spherical(&format!("desitter{n}"), n, &f, true, &desc),
            "r",
        ));
    }
    for n in 4..=6 {
        bases.push((product2sphere(n), "x1"));
    }
    bases.push((
        spherical(
            "perturbed4",
            4,
            "1 - 2/r + 1/(4*r^2)",
            false,
            "4d perturbed black hole (not conformally Einstein)",
        ),
        "r",
    ));

    let mut out: Vec<CatalogEntry> = Vec::with_capacity(bases.len() * 3);
    let mut tails: Vec<CatalogEntry> = Vec::new();
    for (base, coord) in bases {
        tails.extend(variants(&base, coord));
        out.push(base);
    }
    out.extend(tails);
    out
}

/// Look up one entry by name.
pub fn find(name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Invalid(format!("no catalog metric named `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{curvature_bundle, evaluate_field, evaluate_metric};
    use crate::scalar::{Mode, Scalar};
    use crate::weyl::{invariants, WeylPoint};
    use num_rational::BigRational;

    #[test]
    fn entries_are_unique_well_formed_and_round_trip() {
        let all = catalog();
        assert_eq!(all.len(), 45);
        for e in &all {
            assert!(
                all.iter().filter(|o| o.name == e.name).count() == 1,
                "duplicate name {}",
                e.name
            );
            let mf = e.metric_file().unwrap_or_else(|err| {
                panic!("{} does not parse: {err}\n{}", e.name, e.text)
            });
            assert!(mf.points.len() >= 3, "{} needs sample points", e.name);
            assert_eq!(
                mf,
                MetricFile::parse(&mf.to_text()).unwrap(),
                "{} round trip",
                e.name
            );
            mf.to_metric_spec(&e.name).unwrap();
        }
        assert!(find("schwarzschild4").is_ok());
        assert!(find("schwarzschild4_poly").is_ok());
        assert!(find("nonsense").is_err());
    }

    #[test]
    fn conformal_variants_note_their_factor() {
        for e in catalog() {
            let mf = e.metric_file().unwrap();
            if e.name.ends_with("_exp") || e.name.ends_with("_poly") {
                assert!(mf.conformal.is_some(), "{}", e.name);
                assert!(e.description.contains("omega ="), "{}", e.name);
            } else {
                assert!(mf.conformal.is_none(), "{}", e.name);
            }
        }
    }

    fn exact_invariants_at_point(name: &str, point: usize, max_p: usize) -> Vec<Scalar> {
        let mf = find(name).unwrap().metric_file().unwrap();
        let spec = mf.to_metric_spec(name).unwrap();
        let bundle = curvature_bundle(&spec).unwrap();
        let binding = spec.binding(&mf.points[point].1, Mode::Exact).unwrap();
        let pm = evaluate_metric(&spec, &bundle.inverse, &binding).unwrap();
        let cw = evaluate_field(&bundle.weyl22, &binding).unwrap();
        let w = WeylPoint::new(pm, cw).unwrap();
        let inv = invariants(&w, max_p);
        (2..=max_p).map(|p| inv.trace(p).clone()).collect()
    }

    fn rational(num: i64, den: i64) -> Scalar {
        Scalar::from_rational(&BigRational::new(num.into(), den.into()), Mode::Exact)
    }

    #[test]
    fn black_hole_chain_traces_match_reference_values() {
        // independently computed chain traces at the r = 4 sample point
        let schw = exact_invariants_at_point("schwarzschild4", 1, 3);
        assert!(schw[0].sub(&rational(3, 256)).is_zero(), "{schw:?}");
        assert!(schw[1].sub(&rational(3, 8192)).is_zero(), "{schw:?}");
        let tang5 = exact_invariants_at_point("tangherlini5", 1, 2);
        assert!(tang5[0].sub(&rational(9, 2048)).is_zero(), "{tang5:?}");
    }

    #[test]
    fn product_metric_matches_reference_invariants() {
        let traces = exact_invariants_at_point("product2sphere4", 0, 6);
        let expected = [
            rational(4, 3),
            rational(4, 9),
            rational(4, 9),
            rational(20, 81),
            rational(44, 243),
        ];
        for (got, want) in traces.iter().zip(&expected) {
            assert!(got.sub(want).is_zero(), "got {got:?}, want {want:?}");
        }
    }
}
