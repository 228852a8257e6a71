//! Built-in experiment presets.

/// (name, one-line description, config text)
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "zero",
        "zero kernel and zero initial data; the trajectory stays identically zero",
        "\
model.spectrum.n_modes = 2
model.nonlinearity.kernel = zero
model.delay.kind = constant
model.delay.r_const = 0.5
model.h = 1.0
initial.kind = zero
run.kind = solve
run.t_final = 1.0
",
    ),
    (
        "decay",
        "free equation with single-mode data; reproduces the exact semigroup decay",
        "\
model.spectrum.n_modes = 4
model.nonlinearity.kernel = zero
model.delay.kind = constant
model.delay.r_const = 0.5
model.h = 1.0
initial.kind = single-mode-decay
initial.amplitude = 1.0
run.kind = solve
run.t_final = 2.0
",
    ),
    (
        "linear-dde-oracle",
        "one-mode linear constant-delay reduction checked against the stepping oracle",
        "\
model.spectrum.n_modes = 1
model.nonlinearity.kernel = cosine
# amplitude = kappa / (pi/2) for gain kappa = 0.3
model.nonlinearity.kernel_amplitude = 0.1909859317102744
model.nonlinearity.b = identity
model.nonlinearity.grid_points = 64
model.delay.kind = constant
model.delay.r_const = 0.5
model.h = 1.0
initial.kind = single-mode-decay
initial.amplitude = 0.5
run.kind = solve
run.t_final = 2.0
run.m_t = 49
run.oracle_check = true
run.oracle_tol = 1e-5
run.oracle_dt = 1e-5
",
    ),
    (
        "threshold-solve",
        "full 16-mode model with the threshold delay; solves and logs contraction data",
        "\
model.spectrum.n_modes = 16
model.nonlinearity.kernel = gaussian
model.nonlinearity.kernel_amplitude = 0.2
model.nonlinearity.kernel_width = 0.5
model.nonlinearity.b = tanh
model.delay.kind = threshold
model.delay.c1 = 0.2
model.delay.c2 = 2.0
model.delay.c3 = 0.5
model.h = 2.0
initial.kind = bump
initial.amplitude = 0.3
run.kind = solve
run.t_final = 2.0
",
    ),
    (
        "manifold-project",
        "projects bump data onto the compatibility manifold and reports the residual",
        "\
model.spectrum.n_modes = 8
model.nonlinearity.kernel = gaussian
model.nonlinearity.kernel_amplitude = 0.2
model.nonlinearity.kernel_width = 0.5
model.nonlinearity.b = tanh
model.delay.kind = threshold
model.delay.c1 = 0.2
model.delay.c2 = 2.0
model.delay.c3 = 0.5
model.h = 2.0
initial.kind = bump
initial.amplitude = 0.3
run.kind = manifold
",
    ),
    (
        "variational-check",
        "finite-difference check that the linearized flow is the semiflow derivative",
        "\
model.spectrum.n_modes = 4
model.nonlinearity.kernel = gaussian
model.nonlinearity.kernel_amplitude = 0.2
model.nonlinearity.kernel_width = 0.6
model.nonlinearity.b = tanh
model.delay.kind = threshold
model.delay.c1 = 0.2
model.delay.c2 = 2.0
model.delay.c3 = 0.5
model.h = 2.0
initial.kind = bump
initial.amplitude = 0.25
run.kind = variational
variational.t_eval = 0.3
variational.h_steps = 1e-2,1e-3,1e-4
",
    ),
    (
        "holder-cusp",
        "cusp initial data; reports the sampled Hölder exponent of the forcing",
        "\
model.spectrum.n_modes = 8
model.nonlinearity.kernel = gaussian
model.nonlinearity.kernel_amplitude = 0.2
model.nonlinearity.kernel_width = 0.5
model.nonlinearity.b = tanh
model.delay.kind = threshold
model.delay.c1 = 0.2
model.delay.c2 = 2.0
model.delay.c3 = 0.5
model.h = 2.0
initial.kind = cusp
initial.amplitude = 0.2
initial.cusp_position = 0.6
initial.cusp_sharpness = 0.01
run.kind = solve
run.t_final = 0.3
",
    ),
    (
        "certify",
        "runs the full acceptance suite; exit 0 iff every criterion passes",
        "\
run.kind = certify
",
    ),
];

pub fn get(name: &str) -> Option<&'static (&'static str, &'static str, &'static str)> {
    PRESETS.iter().find(|(n, _, _)| *n == name)
}

/// Stable listing, one preset per line.
pub fn list() -> String {
    let mut out = String::new();
    for (name, desc, _) in PRESETS {
        out.push_str(&format!("{name:20} {desc}\n"));
    }
    out
}

/// Closest preset name by edit distance, for unknown-name diagnostics.
pub fn nearest(name: &str) -> &'static str {
    PRESETS
        .iter()
        .min_by_key(|(n, _, _)| edit_distance(name, n))
        .map(|(n, _, _)| *n)
        .unwrap()
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    #[test]
    fn all_presets_parse() {
        assert!(PRESETS.len() >= 6);
        for (name, _, text) in PRESETS {
            ExperimentConfig::parse_str(text)
                .unwrap_or_else(|e| panic!("preset {name} does not parse: {e}"));
        }
    }

    #[test]
    fn nearest_name_hint() {
        assert_eq!(nearest("certfy"), "certify");
        assert_eq!(nearest("zer"), "zero");
    }

    #[test]
    fn listing_is_stable() {
        let a = list();
        let b = list();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), PRESETS.len());
    }
}
