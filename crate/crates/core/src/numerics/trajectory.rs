use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Time-ordered samples of an augmented state produced by the integrator.
///
/// States and their time derivatives are stored row-major in flat buffers.
/// `controls` and `switching` are filled by the owning problem after
/// integration and are empty until then.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    pub controls: Vec<f64>,
    pub switching: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(dim: usize, samples: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(samples),
            states: Vec::with_capacity(samples * dim),
            derivs: Vec::with_capacity(samples * dim),
            controls: Vec::new(),
            switching: Vec::new(),
        }
    }

    /// Single-sample trajectory, used for zero-length horizons.
    pub fn single(t: f64, y: &[f64], dy: &[f64]) -> Self {
        let mut traj = Self::with_capacity(y.len(), 1);
        traj.push(t, y, dy);
        traj
    }

    pub(crate) fn push(&mut self, t: f64, y: &[f64], dy: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert!(self.times.last().map_or(true, |&last| t > last));
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(dy);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    pub fn initial_state(&self) -> &[f64] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// One component across all samples.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states().map(|y| y[j]).collect()
    }

    /// Index `i` with `times[i] <= t <= times[i + 1]`.
    fn bracket(&self, t: f64) -> usize {
        let n = self.len();
        if n < 2 {
            return 0;
        }
        match self.times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of the state at `t`, clamped to the
    /// recorded span.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        if self.len() == 1 || t <= self.start_time() {
            out.copy_from_slice(self.initial_state());
            return;
        }
        if t >= self.end_time() {
            out.copy_from_slice(self.final_state());
            return;
        }
        let i = self.bracket(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let (y0, y1) = (self.state(i), self.state(i + 1));
        let (f0, f1) = (self.derivative(i), self.derivative(i + 1));
        for j in 0..self.dim {
            let dy = y1[j] - y0[j];
            out[j] = (1.0 - th) * y0[j]
                + th * y1[j]
                + th * (th - 1.0) * ((1.0 - 2.0 * th) * dy + (th - 1.0) * h * f0[j] + th * h * f1[j]);
        }
    }
}

/// Column-labelled numeric table used for the trajectory CSV artifact.
///
/// Values are printed with 17 significant digits so a write/read cycle is
/// lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))??;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: `{}`: {e}", lineno + 2, s.trim())))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 2,
                    columns.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}
