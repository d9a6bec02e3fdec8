use biot_brinkman::assembly::{assemble_system, SpaceSet};
use biot_brinkman::mesh::{build_unit_square_mesh, classify_boundary, BoundarySpec};
use biot_brinkman::mms::manufactured_case;
use biot_brinkman::preconditioner::{build_preconditioner, Variant};
use biot_brinkman::solver::minres;
use biot_brinkman::sparse::norm2;
use biot_brinkman::ParameterSet;

fn main() {
    for c0 in [1e-8, 1.0] {
        for n in [8usize, 16, 32, 64] {
            let mut params = ParameterSet::default();
            params.lambda = 1.0; params.nu = 1e-8; params.kappa = 1e-8; params.c0 = c0;
            let mut mesh = build_unit_square_mesh(n).unwrap();
            classify_boundary(&mut mesh, BoundarySpec::Mixed);
            let exact = manufactured_case(params).unwrap();
            let mut spaces = SpaceSet::build(&mesh, 0).unwrap();
            let data = exact.problem_data(None);
            let system = assemble_system(&mut spaces, &params, &data).unwrap();
            let pc = build_preconditioner(Variant::B3, &spaces, &params, &system).unwrap();
            let (_, rep) = minres(&system.matrix, Some(&pc), &system.rhs, 1e-6, 500).unwrap();
            println!("c0={c0:.0e} n={n}: iters={} |b|={:.3e} final_rel={:.2e}",
                rep.iterations, norm2(&system.rhs), rep.relative_residual);
        }
    }
}
