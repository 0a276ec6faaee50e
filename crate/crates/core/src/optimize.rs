//! Derivative-free minimization with the Nelder–Mead simplex method.

/// Stopping rules for [`nelder_mead`].
#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this distance of the best one.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            f_tol: 1e-16,
            x_tol: 1e-12,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` starting from `x0`, with dimension-adaptive coefficients.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    if n == 0 {
        return Minimum {
            x: Vec::new(),
            value: f(x0),
            evaluations: 1,
        };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evaluations = n + 1;

    let along = |from: &[f64], to: &[f64], t: f64| -> Vec<f64> {
        from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
    };

    while evaluations < opts.max_evaluations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && size <= opts.x_tol {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        let reflected = along(&centroid, &worst, -alpha);
        let fr = f(&reflected);
        evaluations += 1;

        if fr < values[0] {
            let expanded = along(&centroid, &worst, -alpha * gamma);
            let fe = f(&expanded);
            evaluations += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(&centroid, &reflected, rho);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = along(&centroid, &worst, rho);
            let fc = f(&c);
            (c, fc)
        };
        evaluations += 1;
        if fc < fr.min(values[n]) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = along(&best, &simplex[i], sigma);
            values[i] = f(&simplex[i]);
        }
        evaluations += n;
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
    }
}

/// Runs [`nelder_mead`] repeatedly, restarting from the incumbent with a
/// shrinking simplex, which helps the method escape premature collapse.
pub fn nelder_mead_polished(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
    rounds: usize,
) -> Minimum {
    let mut best = nelder_mead(&f, x0, opts);
    let mut step = opts.initial_step;
    for _ in 1..rounds {
        step *= 0.1;
        let local = NelderMeadOptions {
            initial_step: step.max(1e-6),
            ..opts.clone()
        };
        let next = nelder_mead(&f, &best.x, &local);
        let evaluations = best.evaluations + next.evaluations;
        if next.value < best.value {
            best = Minimum {
                evaluations,
                ..next
            };
        } else {
            best.evaluations = evaluations;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead_polished(rosen, &[-1.2, 1.0], &NelderMeadOptions::default(), 3);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{m:?}"
        );
    }

    #[test]
    fn minimizes_shifted_quadratic_in_six_dimensions() {
        let target = [0.3, -1.0, 2.0, 0.5, -0.25, 1.5];
        let q = |x: &[f64]| {
            x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        };
        let m = nelder_mead_polished(q, &[0.0; 6], &NelderMeadOptions::default(), 3);
        assert!(m.value < 1e-14, "{m:?}");
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.1).powi(2) + (x[1] + 0.2).powi(4);
        let a = nelder_mead(f, &[1.0, 1.0], &NelderMeadOptions::default());
        let b = nelder_mead(f, &[1.0, 1.0], &NelderMeadOptions::default());
        assert_eq!(a, b);
    }
}
