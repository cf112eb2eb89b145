//! Golden-section search for one-dimensional unimodal objectives.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Best point seen by a search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// Returns the best evaluated point, preferring the smaller abscissa on equal values.
/// Both endpoints are evaluated too, so a minimum on the boundary is reported exactly.
pub fn golden_section<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Minimum, E> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = Minimum {
        x: a,
        value: f(a)?,
        evaluations: 1,
        converged: false,
    };
    let record = |x: f64, v: f64, best: &mut Minimum| {
        best.evaluations += 1;
        if v < best.value || (v == best.value && x < best.x) {
            best.x = x;
            best.value = v;
        }
    };
    let fb = f(b)?;
    record(b, fb, &mut best);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    record(c, fc, &mut best);
    let mut fd = f(d)?;
    record(d, fd, &mut best);

    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            best.converged = true;
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            record(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            record(d, fd, &mut best);
        }
    }
    if (b - a).abs() <= tol {
        best.converged = true;
    }
    Ok(best)
}

/// Golden-section search over `ln x` for positive `x` in `[lo, hi]`; `rel_tol` bounds
/// the final bracket ratio `hi/lo − 1` (approximately).
pub fn golden_section_log<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<Minimum, E> {
    let m = golden_section(|t: f64| f(t.exp()), lo.ln(), hi.ln(), rel_tol, max_iter)?;
    Ok(Minimum { x: m.x.exp(), ..m })
}
