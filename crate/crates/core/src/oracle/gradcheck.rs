/// Maximum relative error `|fd − an| / max(1, |an|)` between `analytic` and
/// central differences of `f` with step `eps`, over all coordinates.
pub fn finite_diff_check(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut x = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x);
        x[i] = orig - eps;
        let down = f(&x);
        x[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let err = (fd - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
