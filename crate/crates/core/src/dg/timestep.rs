/// One step of the three-stage strong-stability-preserving Runge-Kutta scheme:
///
/// ```text
/// U1 = U + dt L(U)
/// U2 = 3/4 U + 1/4 (U1 + dt L(U1))
/// U  = 1/3 U + 2/3 (U2 + dt L(U2))
/// ```
///
/// `rhs(stage, u, out)` writes `L(u)` for stage `0..3`; `after_stage` may
/// modify (limit) or reject each intermediate state.
pub fn ssp_rk3_step<E>(
    u: &mut [f64],
    dt: f64,
    mut rhs: impl FnMut(usize, &[f64], &mut [f64]) -> Result<(), E>,
    mut after_stage: impl FnMut(usize, &mut [f64]) -> Result<(), E>,
) -> Result<(), E> {
    let n = u.len();
    let u0 = u.to_vec();
    let mut k = vec![0.0; n];
    let mut stage = vec![0.0; n];

    rhs(0, u, &mut k)?;
    for i in 0..n {
        stage[i] = u0[i] + dt * k[i];
    }
    after_stage(0, &mut stage)?;

    rhs(1, &stage, &mut k)?;
    for i in 0..n {
        stage[i] = 0.75 * u0[i] + 0.25 * (stage[i] + dt * k[i]);
    }
    after_stage(1, &mut stage)?;

    rhs(2, &stage, &mut k)?;
    for i in 0..n {
        u[i] = (1.0 / 3.0) * u0[i] + (2.0 / 3.0) * (stage[i] + dt * k[i]);
    }
    after_stage(2, u)?;
    Ok(())
}

/// Stage weights of the scheme as a Butcher tableau: the step equals
/// `dt * sum_s WEIGHTS[s] * L(U_s)` for a linear operator-free increment.
pub const SSP_RK3_WEIGHTS: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];

/// Stage times as fractions of `dt`.
pub const SSP_RK3_NODES: [f64; 3] = [0.0, 1.0, 0.5];

/// `cfl * dz / ((2k + 1) max|lambda|)`.
pub fn cfl_dt(cfl: f64, dz: f64, degree: usize, max_speed: f64) -> f64 {
    cfl * dz / ((2 * degree + 1) as f64 * max_speed)
}
