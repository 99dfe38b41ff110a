//! One-dimensional minimization: coarse grid scan followed by golden-section
//! refinement. No convexity assumption beyond the grid resolution.

const INV_GOLDEN: f64 = 0.381_966_011_250_105_1; // 2 - phi

/// Golden-section search for the minimum of `f` on `[a, b]`.
///
/// Stops once the interval is narrower than `xtol` (absolute). Returns
/// `(x_min, f_min)`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let mut x1 = a + INV_GOLDEN * (b - a);
    let mut x2 = b - INV_GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    // 400 iterations shrink the bracket by ~1e-83; the tolerance test is the
    // real stop, this is a hard cap against xtol = 0 misuse.
    for _ in 0..400 {
        if (b - a).abs() <= xtol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_GOLDEN * (b - a);
            f2 = f(x2);
        }
    }

    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scan `grid_points` equispaced points of `[a, b]` (endpoints included),
/// then refine around the best point with golden-section search.
///
/// Returns `(x_min, f_min, at_boundary)` where `at_boundary` reports whether
/// the coarse scan bottomed out at an endpoint of the interval.
pub fn grid_then_golden(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    grid_points: usize,
    xtol: f64,
) -> (f64, f64, bool) {
    assert!(grid_points >= 2, "need at least the two endpoints");
    assert!(b > a, "empty interval");

    let step = (b - a) / (grid_points - 1) as f64;
    let mut best_i = 0;
    let mut best_f = f64::INFINITY;
    for i in 0..grid_points {
        let x = if i + 1 == grid_points {
            b
        } else {
            a + step * i as f64
        };
        let fx = f(x);
        if fx < best_f {
            best_f = fx;
            best_i = i;
        }
    }

    let lo = if best_i == 0 {
        a
    } else {
        a + step * (best_i - 1) as f64
    };
    let hi = if best_i + 1 >= grid_points {
        b
    } else {
        a + step * (best_i + 1) as f64
    };
    let (gx, gf) = golden_section_min(&f, lo, hi, xtol);

    let at_boundary = best_i == 0 || best_i + 1 == grid_points;
    if gf < best_f {
        (gx, gf, at_boundary)
    } else {
        let x = if best_i + 1 == grid_points {
            b
        } else {
            a + step * best_i as f64
        };
        (x, best_f, at_boundary)
    }
}
