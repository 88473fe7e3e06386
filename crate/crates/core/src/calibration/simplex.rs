//! Nelder-Mead simplex descent on the unit box `[0, 1]^d`.
//!
//! Trial points are clamped coordinate-wise onto the box. A run is a sequence
//! of outer iterations; each rebuilds a fresh simplex around the incumbent
//! and descends until the simplex collapses. The run has converged once an
//! outer iteration improves the objective by no more than the tolerance.

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub(crate) struct SimplexOptions {
    /// Edge length of the first simplex, in unit-box coordinates.
    pub initial_step: f64,
    /// Edge length of the simplex rebuilt at each restart.
    pub restart_step: f64,
    pub objective_tolerance: f64,
    /// Budget of simplex iterations across all outer iterations.
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spread below which a simplex counts as collapsed.
const VALUE_SPREAD: f64 = 1e-15;
const POINT_SPREAD: f64 = 1e-12;

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    options: &SimplexOptions,
) -> SimplexOutcome {
    let mut best = start.to_vec();
    clamp_unit(&mut best);
    let mut best_value = eval(&mut f, &best);
    let mut iterations = 0;
    let mut step = options.initial_step;

    // The first outer iteration establishes a baseline; convergence is judged
    // on the improvement of every later one.
    let mut first = true;
    loop {
        let (point, value, used) = descend(
            &mut f,
            &best,
            best_value,
            step,
            options.max_iterations - iterations,
        );
        iterations += used;
        let improvement = best_value - value;
        if value < best_value {
            best = point;
            best_value = value;
        }
        if !first && improvement <= options.objective_tolerance {
            return SimplexOutcome {
                point: best,
                value: best_value,
                iterations,
                converged: true,
            };
        }
        if iterations >= options.max_iterations {
            return SimplexOutcome {
                point: best,
                value: best_value,
                iterations,
                converged: false,
            };
        }
        first = false;
        step = options.restart_step;
    }
}

/// One Nelder-Mead descent from `origin`. Returns the best vertex, its value
/// and the number of iterations used.
fn descend<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    origin: &[f64],
    origin_value: f64,
    step: f64,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let dim = origin.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((origin.to_vec(), origin_value));
    for i in 0..dim {
        let mut vertex = origin.to_vec();
        vertex[i] = if origin[i] + step <= 1.0 {
            origin[i] + step
        } else {
            origin[i] - step
        };
        let value = eval(f, &vertex);
        simplex.push((vertex, value));
    }

    let mut used = 0;
    while used < budget {
        // Stable sort keeps ties in insertion order, so runs are reproducible.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let value_spread = if worst.is_finite() {
            worst - best
        } else {
            f64::INFINITY
        };
        let point_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if value_spread <= VALUE_SPREAD * best.abs().max(1.0) || point_spread <= POINT_SPREAD {
            break;
        }
        used += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let toward = |coef: f64, target: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(target)
                .map(|(c, t)| c + coef * (t - c))
                .collect();
            clamp_unit(&mut p);
            p
        };

        let reflected = toward(-REFLECT, &simplex[dim].0);
        let reflected_value = eval(f, &reflected);

        if reflected_value < simplex[0].1 {
            let expanded = toward(EXPAND, &reflected);
            let expanded_value = eval(f, &expanded);
            simplex[dim] = if expanded_value < reflected_value {
                (expanded, expanded_value)
            } else {
                (reflected, reflected_value)
            };
            continue;
        }
        if reflected_value < simplex[dim - 1].1 {
            simplex[dim] = (reflected, reflected_value);
            continue;
        }

        let contracted = if reflected_value < simplex[dim].1 {
            let outside = toward(CONTRACT, &reflected);
            let v = eval(f, &outside);
            (v <= reflected_value).then_some((outside, v))
        } else {
            let inside = toward(CONTRACT, &simplex[dim].0);
            let v = eval(f, &inside);
            (v < simplex[dim].1).then_some((inside, v))
        };
        match contracted {
            Some(vertex) => simplex[dim] = vertex,
            None => {
                let anchor = simplex[0].0.clone();
                for (x, value) in simplex.iter_mut().skip(1) {
                    for (xi, ai) in x.iter_mut().zip(&anchor) {
                        *xi = ai + SHRINK * (*xi - ai);
                    }
                    *value = eval(f, x);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    (point, value, used)
}
