use smolu::estimators::cdf::*;
use smolu::ObservationBall;

fn main() {
    let ball = ObservationBall::new(1, 1.0).unwrap();
    let kern = make_flat_kernel(2).unwrap();
    let x0 = 1.0;
    let h = 0.2;
    let line = MellinLine::for_horizon(3200.0).unwrap();
    let grid = geometric_grid(1e-6, 6.0, 48.0).unwrap();
    let psi = psi_on_grid(x0, h, &ball, &kern, &line, &grid).unwrap();
    println!("omega_max_used = {}, tail_ratio = {:.3e}", psi.omega_max_used, psi.tail_ratio);
    let probes = [0.05, 0.3, 1.0, 2.0, 4.0];
    let direct = psi_direct_values(x0, h, &ball, &kern, line.s, 0.25, psi.omega_max_used, &probes).unwrap();
    for (k, &t) in probes.iter().enumerate() {
        // nearest grid point
        let i = psi.t.iter().position(|&g| g >= t).unwrap();
        println!("t={t}: grid psi={:.6e} (at {:.4}), direct={:.6e}", psi.psi[i], psi.t[i], direct[k]);
    }
    // integral of |psi| mass across ranges
    let mut lowmass = 0.0; let mut himass = 0.0;
    for i in 0..psi.t.len()-1 {
        let w = psi.t[i+1]-psi.t[i];
        if psi.t[i] < 0.01 { lowmass += psi.psi[i].abs()*w; } else { himass += psi.psi[i].abs()*w; }
    }
    println!("int |psi| below 0.01: {lowmass:.4}, above: {himass:.4}");
}
