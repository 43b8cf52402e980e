//! Euclidean projection onto an ℓ1 ball (sort-and-threshold).

/// Projects `v` onto `{x : ‖x‖₁ ≤ radius}` in place.
pub fn project_l1_ball(v: &mut [f64], radius: f64) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return;
    }
    if radius <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let m = (x.abs() - theta).max(0.0);
        *x = m.copysign(*x);
    }
}

/// Projects `v` onto `{x : ‖x − center‖₁ ≤ radius}` in place.
pub fn project_l1_ball_centered(v: &mut [f64], center: &[f64], radius: f64) {
    v.iter_mut().zip(center).for_each(|(x, c)| *x -= c);
    project_l1_ball(v, radius);
    v.iter_mut().zip(center).for_each(|(x, c)| *x += c);
}
