use std::io::{self, BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_eigen, CMatrix, DEFAULT_CLUSTER_TOL};
use crate::state::{tangent_from_h_gamma, DensityOperator, NonHermitianGenerator, DEFAULT_RANK_TOL};

use super::optimize::{decay_rate, optimize_generator};
use super::schedule::GeneratorField;
use super::speed::bures_speed;

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Requested step; the actual step is the closest value dividing the horizon evenly.
    pub step: f64,
    /// Rescale the carried matrix to unit trace after every step.
    pub renormalize_each_step: bool,
    pub rank_tol: f64,
    pub cluster_tol: f64,
    /// Also record `γ_opt = 2Tr(Γ_opt ρ)` of the optimized generator at each grid point.
    pub track_optimized_rate: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-3,
            renormalize_each_step: true,
            rank_tol: DEFAULT_RANK_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            track_optimized_rate: false,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Self {
        IntegratorConfig {
            step,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidArgument {
                name: "dt",
                detail: format!("must be positive and finite, got {}", self.step),
            });
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::InvalidArgument {
                name: "rank_tol",
                detail: format!("must be positive, got {}", self.rank_tol),
            });
        }
        if !(self.cluster_tol > 0.0) {
            return Err(Error::InvalidArgument {
                name: "cluster_tol",
                detail: format!("must be positive, got {}", self.cluster_tol),
            });
        }
        Ok(())
    }
}

/// Sampled trajectory of the normalized state together with the success
/// probability `Tr ρ̃(t)` of the un-normalized evolution.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    pub norms: Vec<f64>,
    /// `γ(t) = 2Tr(Γρ)`.
    pub decay_rates: Vec<f64>,
    pub speeds: Vec<f64>,
    pub optimized_rates: Option<Vec<f64>>,
    /// Generator evaluated at each grid point.
    pub generators: Vec<NonHermitianGenerator>,
    /// Smallest support eigenvalue seen at any grid point.
    pub min_retained_eigenvalue: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.states.first().map_or(0, DensityOperator::rank)
    }

    /// Writes `# columns: t,norm,gamma,speed[,gamma_opt][,re_i_j,im_i_j…]`
    /// followed by one row per grid point in shortest round-trip notation.
    pub fn write_csv<W: Write>(&self, mut out: W, include_states: bool) -> io::Result<()> {
        let mut columns = vec!["t".to_string(), "norm".into(), "gamma".into(), "speed".into()];
        if self.optimized_rates.is_some() {
            columns.push("gamma_opt".into());
        }
        let n = self.states.first().map_or(0, DensityOperator::dim);
        if include_states {
            for i in 0..n {
                for j in 0..n {
                    columns.push(format!("re_{i}_{j}"));
                    columns.push(format!("im_{i}_{j}"));
                }
            }
        }
        writeln!(out, "# columns: {}", columns.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k], self.norms[k], self.decay_rates[k], self.speeds[k]];
            if let Some(opt) = &self.optimized_rates {
                row.push(opt[k]);
            }
            if include_states {
                let m = self.states[k].matrix();
                for i in 0..n {
                    for j in 0..n {
                        row.push(m[(i, j)].re);
                        row.push(m[(i, j)].im);
                    }
                }
            }
            write_row(&mut out, &row)?;
        }
        Ok(())
    }
}

/// Writes a `# columns:` header and the rows in the same notation as
/// [`TrajectoryRecord::write_csv`], so [`read_csv`] can parse it back.
pub fn write_table<W: Write>(mut out: W, columns: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(out, "# columns: {}", columns.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        write_row(&mut out, row)?;
    }
    Ok(())
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> io::Result<()> {
    let text: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
    writeln!(out, "{}", text.join(","))
}

/// Parsed CSV with a `# columns:` header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Reads the CSV layout produced by [`TrajectoryRecord::write_csv`].
pub fn read_csv<R: BufRead>(input: R) -> io::Result<CsvTable> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let columns: Vec<String> = header
        .strip_prefix("# columns:")
        .ok_or_else(|| bad(format!("missing header, found {header:?}")))?
        .trim()
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
        if row.len() != columns.len() {
            return Err(bad(format!(
                "line {}: {} values for {} columns",
                lineno + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}

struct Stage {
    tangent: CMatrix,
    rate: f64,
}

fn stage(field: &dyn GeneratorField, t: f64, m: &CMatrix, cfg: &IntegratorConfig) -> Result<Stage> {
    let rho = Arc::new(DensityOperator::relaxed(m, cfg.rank_tol, cfg.cluster_tol)?);
    let gen = field.generator(t, &rho)?;
    Ok(Stage {
        tangent: tangent_from_h_gamma(&gen, &rho)?.matrix().clone(),
        rate: decay_rate(&gen, &rho),
    })
}

/// Checks the rank of an accepted step and turns it into a validated state.
fn accept(m: &CMatrix, t: f64, rank: usize, cfg: &IntegratorConfig) -> Result<(DensityOperator, f64)> {
    let trace = m.trace().re;
    let normalized = m * cr(1.0 / trace);
    let (values, _) = hermitian_eigen(&crate::linalg::hermitize(&normalized));
    let smallest = if rank == 0 { 0.0 } else { values[rank - 1] };
    if smallest < cfg.rank_tol / 10.0 {
        return Err(Error::RankLoss { time: t, smallest });
    }
    // between rank_tol/10 and rank_tol the support is still counted as intact
    let rank_tol = if smallest > cfg.rank_tol { cfg.rank_tol } else { cfg.rank_tol / 10.0 };
    let rho = DensityOperator::with_tolerances(normalized, rank_tol, cfg.cluster_tol)?;
    if rho.rank() != rank {
        return Err(Error::RankChange {
            time: t,
            rank: rho.rank(),
            expected: rank,
        });
    }
    Ok((rho, smallest))
}

/// Integrates `ρ̇ = −i[H,ρ] − {Γ,ρ} + 2Tr(Γρ)ρ` with classical RK4 over the
/// field's horizon, carrying `log Tr ρ̃` alongside (`d log Tr ρ̃/dt = −γ`).
///
/// State-dependent fields are re-evaluated at every RK stage. The rank of
/// `rho0` is enforced at every step.
pub fn evolve(rho0: &DensityOperator, field: &dyn GeneratorField, config: &IntegratorConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let (t0, t1) = field.horizon();
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::InvalidArgument {
            name: "horizon",
            detail: format!("empty horizon [{t0}, {t1}]"),
        });
    }
    let steps = ((span / config.step).round() as usize).max(1);
    let h = span / steps as f64;
    let rank = rho0.rank();

    let mut record = TrajectoryRecord {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        norms: Vec::with_capacity(steps + 1),
        decay_rates: Vec::with_capacity(steps + 1),
        speeds: Vec::with_capacity(steps + 1),
        optimized_rates: config.track_optimized_rate.then(|| Vec::with_capacity(steps + 1)),
        generators: Vec::with_capacity(steps + 1),
        min_retained_eigenvalue: f64::INFINITY,
    };

    let rho0 = rho0.reclustered(config.cluster_tol)?;
    let mut carried = rho0.matrix().clone();
    let mut state = Arc::new(rho0);
    record.min_retained_eigenvalue = state.smallest_retained();
    let mut log_norm = 0.0_f64;

    for i in 0..=steps {
        let t = t0 + i as f64 * h;
        let gen = field.generator(t, &state)?;
        let rate = decay_rate(&gen, &state);
        let v1 = tangent_from_h_gamma(&gen, &state)?.matrix().clone();
        record.times.push(t);
        record.norms.push(log_norm.exp());
        record.decay_rates.push(rate);
        record.speeds.push(bures_speed(&gen, &state)?);
        if let Some(opt) = record.optimized_rates.as_mut() {
            opt.push(decay_rate(&optimize_generator(&gen, &state)?, &state));
        }
        record.generators.push(gen);
        record.states.push((*state).clone());
        if i == steps {
            break;
        }

        let s2 = stage(field, t + h / 2.0, &(&carried + &v1 * cr(h / 2.0)), config)?;
        let s3 = stage(field, t + h / 2.0, &(&carried + &s2.tangent * cr(h / 2.0)), config)?;
        let s4 = stage(field, t + h, &(&carried + &s3.tangent * cr(h)), config)?;
        carried += (v1 + &s2.tangent * cr(2.0) + &s3.tangent * cr(2.0) + &s4.tangent) * cr(h / 6.0);
        log_norm -= h / 6.0 * (rate + 2.0 * s2.rate + 2.0 * s3.rate + s4.rate);
        if config.renormalize_each_step {
            let trace = carried.trace().re;
            carried *= cr(1.0 / trace);
        }
        let next_t = t0 + (i + 1) as f64 * h;
        let (next, smallest) = accept(&carried, next_t, rank, config)?;
        record.min_retained_eigenvalue = record.min_retained_eigenvalue.min(smallest);
        state = Arc::new(next);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GeneratorSchedule;
    use crate::linalg::{from_diagonal, identity, pauli_x, pauli_z, trace_distance, I};

    #[test]
    fn zero_generator_is_static() {
        let rho = DensityOperator::diagonal(&[0.7, 0.3]).unwrap();
        let field = GeneratorSchedule::constant(NonHermitianGenerator::zero(2), 0.0, 1.0).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(0.1)).unwrap();
        assert_eq!(rec.len(), 11);
        assert!(rec.norms.iter().all(|&n| n == 1.0));
        for s in &rec.states {
            assert!((s.matrix() - rho.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn unitary_limit_matches_closed_form() {
        let rho = DensityOperator::new(
            (identity(2) + pauli_x() * cr(0.4) + pauli_z() * cr(0.3)) * cr(0.5),
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let h = pauli_z() * cr(0.8) + pauli_x() * cr(0.3);
        let field = GeneratorSchedule::constant(NonHermitianGenerator::hermitian(h.clone()).unwrap(), 0.0, 2.0).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(1e-3)).unwrap();
        let (vals, vecs) = hermitian_eigen(&h);
        for (t, s) in rec.times.iter().zip(&rec.states) {
            let u = {
                let phases: Vec<_> = vals.iter().map(|&e| (-I * e * *t).exp()).collect();
                &vecs * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)) * vecs.adjoint()
            };
            let exact = &u * rho.matrix() * u.adjoint();
            assert!(trace_distance(s.matrix(), &exact) < 1e-10);
        }
        assert!(rec.norms.iter().all(|&n| (n - 1.0).abs() < 1e-15));
    }

    #[test]
    fn commuting_decay_matches_populations_and_norm() {
        let rho = DensityOperator::diagonal(&[0.5, 0.5]).unwrap();
        let gamma = from_diagonal(&[0.0, 1.0]);
        let field = GeneratorSchedule::constant(NonHermitianGenerator::anti_hermitian(gamma.clone()).unwrap(), 0.0, 1.5).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(1e-3)).unwrap();
        for (k, t) in rec.times.iter().enumerate() {
            // ρ̃ = diag(½, ½e^{−2t})
            let tilde = from_diagonal(&[0.5, 0.5 * (-2.0 * t).exp()]);
            let norm = 0.5 + 0.5 * (-2.0 * t).exp();
            assert!((rec.norms[k] - norm).abs() < 1e-11);
            assert!(trace_distance(rec.states[k].matrix(), &(tilde * cr(1.0 / norm))) < 1e-11);
        }
        assert!(rec.norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn actual_step_divides_horizon() {
        let rho = DensityOperator::maximally_mixed(2);
        let field = GeneratorSchedule::constant(NonHermitianGenerator::zero(2), 0.0, 1.0).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(0.3)).unwrap();
        assert_eq!(rec.len(), 4);
        assert_eq!(*rec.times.last().unwrap(), 1.0);
    }

    #[test]
    fn rank_loss_is_reported() {
        // population of |1⟩ decays like e^{−2t}; with a coarse rank_tol it leaves the support
        let rho = DensityOperator::diagonal(&[0.5, 0.5]).unwrap();
        let field =
            GeneratorSchedule::constant(NonHermitianGenerator::anti_hermitian(from_diagonal(&[0.0, 5.0])).unwrap(), 0.0, 5.0)
                .unwrap();
        let config = IntegratorConfig {
            rank_tol: 1e-6,
            ..IntegratorConfig::with_step(1e-2)
        };
        match evolve(&rho, &field, &config) {
            Err(Error::RankLoss { time, smallest }) => {
                assert!(time > 0.5 && time < 2.0, "{time}");
                assert!(smallest < 1e-7);
            }
            other => panic!("expected rank loss, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_step() {
        let rho = DensityOperator::maximally_mixed(2);
        let field = GeneratorSchedule::constant(NonHermitianGenerator::zero(2), 0.0, 1.0).unwrap();
        let err = evolve(&rho, &field, &IntegratorConfig::with_step(-1.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument { name: "dt", .. }));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rho = DensityOperator::diagonal(&[0.6, 0.4]).unwrap();
        let gen = NonHermitianGenerator::new(pauli_x() * cr(0.3), from_diagonal(&[0.1, 0.7])).unwrap();
        let field = GeneratorSchedule::constant(gen, 0.0, 0.2).unwrap();
        let config = IntegratorConfig {
            track_optimized_rate: true,
            ..IntegratorConfig::with_step(0.1)
        };
        let rec = evolve(&rho, &field, &config).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("# columns: t,norm,gamma,speed,gamma_opt,re_0_0,im_0_0"));
        let table = read_csv(&buf[..]).unwrap();
        assert_eq!(table.column("norm").unwrap(), rec.norms);
        assert_eq!(table.column("speed").unwrap(), rec.speeds);
        assert_eq!(table.column("gamma_opt").unwrap(), rec.optimized_rates.unwrap());
        assert_eq!(table.column("re_1_1").unwrap()[2], rec.states[2].matrix()[(1, 1)].re);
    }
}
