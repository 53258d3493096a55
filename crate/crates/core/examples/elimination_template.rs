//! Walks the regular problem through the elimination pipeline one stage
//! at a time.

use relpose::gbsolver::{
    assemble_reduced_template, build_action_matrix, extract_roots, quotient_basis_from_pivots, regular_row_spec,
    rref, schur_equivalence_check, PIVOT_TOL, REGULAR_DEGREE, REGULAR_QUOTIENT_SIZE,
};
use relpose::gbsolver::eigen::eigensolve_real;
use relpose::geom::{BearingPair, RotationConstraint, UnitQuaternion};
use relpose::poly::build_f_polynomials;
use relpose::synth::{generate_scene, Correspondences, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    let scene = generate_scene(&SceneConfig { seed: 3, ..Default::default() }, SolverKind::Regular, 4)?;
    let Correspondences::Regular(v) = &scene.correspondences else {
        unreachable!()
    };
    let pairs: &[BearingPair; 4] = v.as_slice().try_into().expect("four pairs");
    let c = RotationConstraint::from_angle(scene.theta)?;

    let f = build_f_polynomials(pairs, &c)?;
    for (k, p) in f.iter().enumerate() {
        println!("f{} has {} terms, degree {}", k + 1, p.terms().count(), p.degree());
    }

    let template = assemble_reduced_template(&f, &regular_row_spec(), REGULAR_DEGREE, &c)?;
    println!("template {:?}", template.shape());
    println!("schur deviation {:.2e}", schur_equivalence_check(&f, &c)?);

    let (reduced, pivots) = rref(&template.matrix, PIVOT_TOL)?;
    let qb = quotient_basis_from_pivots(&template.columns, &pivots, REGULAR_QUOTIENT_SIZE)?;
    let names: Vec<String> = qb.monomials.iter().map(|m| m.to_string()).collect();
    println!("quotient basis ({}): {}", qb.len(), names.join(", "));

    let action = build_action_matrix(&reduced, &template.columns, &pivots, &qb)?;
    let eig = eigensolve_real(&action.matrix)?;
    let roots = extract_roots(&eig, &qb);
    println!("{} real eigenpairs, {} roots kept", eig.len(), roots.roots.len());

    let truth = UnitQuaternion::from_rotation(&scene.pose.rotation).u;
    let nearest = roots.roots.iter().map(|u| (u - truth).norm()).fold(f64::INFINITY, f64::min);
    println!("nearest root to the true u: {nearest:.3e}");
    Ok(())
}
