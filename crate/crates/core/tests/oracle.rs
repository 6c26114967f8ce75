use mgamsgd::elasticity::{ElasticityLoss, LoadCase, Material, ProblemSpec};
use mgamsgd::exec::ExecMode;
use mgamsgd::jet::fd_gradient;
use mgamsgd::network::{forward, init_params, Architecture};
use mgamsgd::reference::{analytic_uniaxial, cube_grid, mse_u};
use mgamsgd::sampling::{generate_grid, GridSpec};

fn loss(n: usize, case: LoadCase, exec: ExecMode) -> ElasticityLoss {
    let arch = Architecture::new(2, 10).unwrap();
    let samples = generate_grid(&GridSpec::uniform(n)).unwrap();
    let gamma = 0.05 * n as f64 * n as f64 * n as f64;
    ElasticityLoss::new(
        arch,
        samples,
        ProblemSpec::new(case, gamma, true),
        Material::new(1.0, 0.3).unwrap(),
    )
    .unwrap()
    .with_exec(exec)
}

#[test]
fn closed_form_network_is_a_zero_of_the_loss() {
    for nu in [0.1, 0.25, 0.3, 0.45] {
        let mat = Material::new(2.0, nu).unwrap();
        let exact = analytic_uniaxial(mat, -0.1);
        let params = exact
            .network_params(Architecture::new(3, 6).unwrap())
            .unwrap();
        let mut l = loss(4, LoadCase::A, ExecMode::Sequential);
        l.arch = *params.arch();
        l.material = mat;
        let b = l.breakdown(&params).unwrap();
        assert!(b.mse < 1e-24, "nu {nu}: {b:?}");
        let err = mse_u(
            |x| forward(&params, x),
            |x| exact.displacement(x),
            &cube_grid(7),
        )
        .unwrap();
        assert!(err < 1e-24);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    for case in [LoadCase::A, LoadCase::B] {
        let params = init_params(Architecture::new(2, 10).unwrap(), 9);
        let (bs, gs) = loss(5, case, ExecMode::Sequential)
            .breakdown_and_gradient(&params)
            .unwrap();
        let (bp, gp) = loss(5, case, ExecMode::Parallel)
            .breakdown_and_gradient(&params)
            .unwrap();
        assert_eq!(bs, bp);
        assert_eq!(gs, gp);
    }
}

#[test]
fn gradient_matches_differences_on_the_training_grid() {
    let l = loss(3, LoadCase::B, ExecMode::Parallel);
    let params = init_params(l.arch, 4);
    let (_, g) = l.breakdown_and_gradient(&params).unwrap();
    let fd = fd_gradient(params.as_slice(), &l, 1e-5).unwrap();
    for (a, b) in g.iter().zip(&fd) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
    }
}
