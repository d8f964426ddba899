//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 60;

/// `∫_a^b g` to relative tolerance `rel_tol` (absolute floor `1e-300`).
pub fn integrate<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (g(a), g(m), g(b));
    let whole = simpson(a, b, fa, fm, fb);
    // Coarse magnitude estimate anchors the relative tolerance.
    let scale = whole.abs().max(1e-300);
    refine(&g, a, b, fa, fm, fb, whole, rel_tol * scale, MAX_DEPTH)
}

/// Sum of [`integrate`] over consecutive breakpoints, for integrands with
/// kinks at known locations.
pub fn integrate_piecewise<G: Fn(f64) -> f64>(g: G, points: &[f64], rel_tol: f64) -> f64 {
    points.windows(2).map(|w| integrate(&g, w[0], w[1], rel_tol)).sum()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<G: Fn(f64) -> f64>(
    g: &G,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
