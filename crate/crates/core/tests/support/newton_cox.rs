//! Reference Newton-Raphson fit of a one-covariate Cox model.
//!
//! Works straight from the score and information of the classic partial
//! likelihood with Breslow handling of ties. Shares no code with the crate.

pub struct NewtonFit {
    pub beta: f64,
    pub iterations: usize,
}

/// Risk-set sums S0, S1, S2 at time `t` (subjects with time >= t).
fn moments(beta: f64, x: &[f64], time: &[f64], t: f64) -> (f64, f64, f64) {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (xi, ti) in x.iter().zip(time) {
        if *ti >= t {
            let w = (beta * xi).exp();
            s0 += w;
            s1 += w * xi;
            s2 += w * xi * xi;
        }
    }
    (s0, s1, s2)
}

pub fn score_and_information(beta: f64, x: &[f64], time: &[f64], event: &[bool]) -> (f64, f64) {
    let mut score = 0.0;
    let mut info = 0.0;
    for i in 0..x.len() {
        if !event[i] {
            continue;
        }
        let (s0, s1, s2) = moments(beta, x, time, time[i]);
        let mean = s1 / s0;
        score += x[i] - mean;
        info += s2 / s0 - mean * mean;
    }
    (score, info)
}

pub fn fit(x: &[f64], time: &[f64], event: &[bool]) -> NewtonFit {
    let mut beta = 0.0;
    for it in 1..=100 {
        let (u, i) = score_and_information(beta, x, time, event);
        let mut step = u / i;
        // Halve until the score shrinks; guards against overshoot on flat data.
        let mut tries = 0;
        while tries < 30 {
            let (u_new, _) = score_and_information(beta + step, x, time, event);
            if u_new.abs() <= u.abs() || step.abs() < 1e-15 {
                break;
            }
            step *= 0.5;
            tries += 1;
        }
        beta += step;
        if step.abs() < 1e-13 {
            return NewtonFit { beta, iterations: it };
        }
    }
    NewtonFit { beta, iterations: 100 }
}
