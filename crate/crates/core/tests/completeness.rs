use varred_nls::eigen::LobpcgOptions;
use varred_nls::field::GridSpec;
use varred_nls::galerkin::{eigen_basis, weighted_modes};
use varred_nls::ground_state::{solve_ground_state, GroundStateOptions};
use varred_nls::model::{EnergyModel, Nonlinearity, Potential};

#[test]
fn galerkin_projection_converges_on_radial_fields() {
    let grid = GridSpec::new(2, 16.0, 128).unwrap();
    let model = EnergyModel::new(
        Nonlinearity::cubic(),
        Potential::isotropic(2, 2).unwrap(),
        grid,
    )
    .unwrap();
    let omega = solve_ground_state(&model, None, &GroundStateOptions::default())
        .unwrap()
        .omega;
    let opts = LobpcgOptions {
        tol: 1e-9,
        max_iter: 2000,
    };
    let (modes, _) = weighted_modes(&omega, 32, &opts, 7).unwrap();
    for h in [omega.clone(), omega.mul(&omega)] {
        let rel: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&k| {
                let b = eigen_basis(&modes, &[], k).unwrap();
                b.project_perp(&h).h1_norm() / h.h1_norm()
            })
            .collect();
        assert!(rel.windows(2).all(|w| w[1] < w[0]), "{rel:?}");
        assert!(rel[3] < 1e-3 * rel[0], "{rel:?}");
    }
}
