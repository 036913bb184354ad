//! Worked values, each checked against an independent evaluation.

use robust_halfspace::cert::cert_fastpath;
use robust_halfspace::ellipsoid::EllipsoidState;
use robust_halfspace::loss::{robust_loss_lp, worst_case_score_lp};
use robust_halfspace::norm::{dual_maximizer, lp_norm};
use robust_halfspace::rcn::surrogate::{glm_loss, link_integral, link_u, phi};
use robust_halfspace::rcn::train::theoretical_steps;
use robust_halfspace::{Halfspace, Label, LabeledExample, NormSpec, SurrogateSpec, Vector};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

fn ex(x: &[f64], y: Label) -> LabeledExample {
    LabeledExample::new(Vector::new(x.to_vec()).unwrap(), y)
}

#[test]
fn norm_values() {
    close(lp_norm(&[1.0, -2.0, 3.0], 1.5), 4.334622872113609, 1e-12);
    close(NormSpec::new(3.0).unwrap().dual_norm(&[1.0, -2.0, 3.0]), 4.334622872113609, 1e-12);
    let u = dual_maximizer(&[1.0, -2.0], 1.0);
    close(u[0] * 1.0 + u[1] * -2.0, 2.0, 1e-12);
}

#[test]
fn linf_worst_case() {
    let h = Halfspace::homogeneous(vec![1.0, -2.0]).unwrap();
    let e = ex(&[1.0, 1.0], Label::Pos);
    close(worst_case_score_lp(&h, &e, 0.5, NormSpec::LINF).unwrap(), -2.5, 1e-12);
    assert!(robust_loss_lp(&h, &e, 0.5, NormSpec::LINF).unwrap());
    let z = cert_fastpath(&h, &e, 0.5, NormSpec::LINF).unwrap().counterexample().unwrap().as_slice().to_vec();
    close(z[0], 0.5, 1e-12);
    close(z[1], 1.5, 1e-12);
}

#[test]
fn l2_counterexample() {
    let h = Halfspace::homogeneous(vec![1.0, 0.0]).unwrap();
    let r = cert_fastpath(&h, &ex(&[0.3, 0.0], Label::Pos), 0.5, NormSpec::L2).unwrap();
    let z = r.counterexample().unwrap();
    close(z[0], -0.2, 1e-12);
    close(z[1], 0.0, 1e-12);
}

#[test]
fn surrogate_parameters() {
    let s = SurrogateSpec::new(0.5, 0.1, 0.1, NormSpec::L2).unwrap();
    close(s.lambda(), 0.11904761904761904, 1e-15);
    close(s.eps_prime(), 0.019047619047619035, 1e-15);
    close(s.eps_prime_closed_form(), 0.01904761904761905, 1e-15);
    let s = SurrogateSpec::new(0.2, 0.2, 0.1, NormSpec::L2).unwrap();
    close(s.lambda(), 0.2058823529411765, 1e-15);
    close(s.planted_value_bound(), 0.3176470588235294, 1e-15);
    close(s.glm_eps_prime(), 0.00075, 1e-15);
    let t = theoretical_steps(2.0, 10, s.leaky_lipschitz(), s.eps_prime()).unwrap();
    close(t, 455625.0, 1e-3);
}

#[test]
fn leaky_and_link_values() {
    close(phi(2.0, 0.25, 1.0), -0.25, 1e-15);
    close(phi(0.1, 0.25, 0.5), 0.6, 1e-15);
    close(link_u(0.25, 0.1, 0.5), 0.7, 1e-15);
    close(glm_loss(&[1.0], &[1.0], 1.0, 0.0, 1.0), -0.25, 1e-15);
    // numerical quadrature of the clamped link
    close(link_integral(0.7, 0.2, 0.3), 0.515, 1e-12);
    close(link_integral(-0.5, 0.2, 0.3), -0.145, 1e-12);
}

#[test]
fn central_cut_det_ratio() {
    let mut e = EllipsoidState::ball(&[0.0, 0.0, 0.0], 1.0);
    let before = e.log_det().unwrap();
    e.cut(&[0.3, -1.0, 0.2], 0).unwrap();
    close((e.log_det().unwrap() - before).exp(), 0.7119140625, 1e-12);
}
