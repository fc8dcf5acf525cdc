//! Fixed-step fourth-order Runge-Kutta for the small deterministic systems
//! used here (three compartments). A fixed step keeps trajectories exactly
//! reproducible; the final step is shortened to land on `t_end`.

/// Integrate `y' = f(y)` from `t = 0` to `t_end`, calling `record(t, y)` at
/// `t = 0` and after every step.
pub(crate) fn rk4<F, R>(f: F, y0: [f64; 3], t_end: f64, step: f64, mut record: R)
where
    F: Fn([f64; 3]) -> [f64; 3],
    R: FnMut(f64, [f64; 3]),
{
    let n_steps = (t_end / step).ceil() as u64;
    let mut t = 0.0;
    let mut y = y0;
    record(t, y);
    for s in 1..=n_steps {
        let t_next = if s == n_steps { t_end } else { s as f64 * step };
        let h = t_next - t;
        let k1 = f(y);
        let k2 = f(add(y, scale(k1, h / 2.0)));
        let k3 = f(add(y, scale(k2, h / 2.0)));
        let k4 = f(add(y, scale(k3, h)));
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        t = t_next;
        record(t, y);
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
