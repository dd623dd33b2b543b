//! One-dimensional minimizers shared by the controllers and the oracle.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `tol`. Returns the best point evaluated.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Uniform grid of `points` values over `[lo, hi]` followed by a golden-section
/// pass over the two cells around the best grid point.
///
/// Ties resolve to the smallest argument: a grid point is only replaced by a
/// strictly better value, and the refined point only replaces the grid winner
/// when strictly lower.
pub fn grid_golden_argmin<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize, rel_tol: f64) -> (f64, f64) {
    if hi <= lo || points < 2 {
        return (lo, f(lo));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let mut best_i = 0;
    let mut best = f(lo);
    for i in 1..points {
        let x = if i == points - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let best_x = if best_i == points - 1 {
        hi
    } else {
        lo + step * best_i as f64
    };
    let a = (best_x - step).max(lo);
    let b = (best_x + step).min(hi);
    let (x, v) = golden_section(&mut f, a, b, rel_tol * (hi - lo));
    if v < best {
        (x, v)
    } else {
        (best_x, best)
    }
}
