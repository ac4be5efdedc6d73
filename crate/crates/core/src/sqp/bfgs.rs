use nalgebra::{DMatrix, DVector};

/// Damping threshold on sᵀy relative to sᵀBs.
pub const POWELL_DAMPING: f64 = 0.2;

/// Powell-damped BFGS update. Returns the damping factor θ (1 means an
/// undamped update); a zero step leaves `b` unchanged and returns `None`.
pub fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) || !sbs.is_finite() {
        return None;
    }
    let sy = s.dot(y);
    let theta = if sy >= POWELL_DAMPING * sbs {
        1.0
    } else {
        (1.0 - POWELL_DAMPING) * sbs / (sbs - sy)
    };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 0.0) || !sr.is_finite() {
        return None;
    }
    *b -= &bs * bs.transpose() / sbs;
    *b += &r * r.transpose() / sr;
    // keep exact symmetry against rounding
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
    Some(theta)
}
