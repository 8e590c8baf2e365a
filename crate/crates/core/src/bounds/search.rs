//! One-dimensional minimisation used by every infimum in this module.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Relative tolerance on the minimiser.
pub const REL_TOL: f64 = 1e-4;

/// Golden-section search for the minimum of `f` on `[a, b]`, to absolute
/// tolerance `tol` on the argument. NaN objective values count as `+∞`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = g(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// `inf_{c ∈ [lo, hi]} obj(c)`: golden-section in `ln c`, followed by a check
/// against both bracket endpoints. Returns `None` for an empty bracket.
pub fn inf_over_c(obj: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if !(lo > 0.0 && hi >= lo) || !hi.is_finite() {
        return None;
    }
    let clean = |c: f64| {
        let v = obj(c);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (u, fu) = golden_section(|u| clean(u.exp()), lo.ln(), hi.ln(), REL_TOL);
    let mut best = (u.exp(), fu);
    for c in [lo, hi] {
        let v = clean(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    Some(best)
}
