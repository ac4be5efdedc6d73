use std::io::{Read, Write};

use super::{ForwardResponse, OcpError};

/// Control values at the N knots t_n = n·t_f/N, n = 1..N. The state at
/// t_0 = 0 is the rest state (no rotation, uniform initial temperature).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    /// Gas temperature, °C.
    pub t_e: Vec<f64>,
    /// Rotation speed, Hz.
    pub omega: Vec<f64>,
    pub t_f: f64,
}

pub const CONTROLS_HEADER: [&str; 7] = [
    "step",
    "time_s",
    "T_e_C",
    "omega_Hz",
    "max_sigma_v_MPa",
    "max_T_C",
    "argmax_node",
];

impl ControlSchedule {
    pub fn new(t_e: Vec<f64>, omega: Vec<f64>, t_f: f64) -> Result<Self, OcpError> {
        let s = Self { t_e, omega, t_f };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(n: usize, t_f: f64, t_e: f64, omega: f64) -> Self {
        Self {
            t_e: vec![t_e; n],
            omega: vec![omega; n],
            t_f,
        }
    }

    pub fn validate(&self) -> Result<(), OcpError> {
        if self.t_e.is_empty() || self.t_e.len() != self.omega.len() {
            return Err(OcpError::InvalidSchedule(format!(
                "need equal, nonzero lengths (T_e {}, omega {})",
                self.t_e.len(),
                self.omega.len()
            )));
        }
        if !(self.t_f > 0.0 && self.t_f.is_finite()) {
            return Err(OcpError::InvalidSchedule(format!("t_f must be > 0, got {}", self.t_f)));
        }
        if self.t_e.iter().chain(&self.omega).any(|v| !v.is_finite()) {
            return Err(OcpError::InvalidSchedule("non-finite control value".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.t_e.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.n() as f64
    }

    /// Knot times including t_0 = 0.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n()).map(|k| k as f64 * self.dt()).collect()
    }

    /// Writes the controls with optional responses. Row 0 is the rest state
    /// with gas temperature `t0`.
    pub fn write_csv<W: Write>(&self, t0: f64, response: Option<&ForwardResponse>, w: W) -> Result<(), OcpError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(CONTROLS_HEADER)?;
        let times = self.times();
        for k in 0..=self.n() {
            let (te, om) = if k == 0 {
                (t0, 0.0)
            } else {
                (self.t_e[k - 1], self.omega[k - 1])
            };
            let (s, t, a) = match response {
                Some(r) => (
                    r.max_sigma[k].to_string(),
                    r.max_t[k].to_string(),
                    r.argmax_node[k].to_string(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            wr.write_record([k.to_string(), times[k].to_string(), te.to_string(), om.to_string(), s, t, a])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads `step,time_s,T_e_C,omega_Hz[,...]`; a step-0 row is skipped and
    /// t_f is the last time.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, OcpError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| OcpError::InvalidSchedule(format!("missing column {name}")))
        };
        let (c_step, c_time, c_te, c_om) = (col("step")?, col("time_s")?, col("T_e_C")?, col("omega_Hz")?);
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64, OcpError> {
                rec.get(c)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| OcpError::InvalidSchedule(format!("row {}: {e}", line + 2)))
            };
            rows.push((num(c_step)?, num(c_time)?, num(c_te)?, num(c_om)?));
        }
        if rows.first().is_some_and(|r| r.0 == 0.0) {
            rows.remove(0);
        }
        let t_f = rows.last().map_or(0.0, |r| r.1);
        let n = rows.len() as f64;
        for (k, r) in rows.iter().enumerate() {
            let k1 = (k + 1) as f64;
            if r.0 != k1 {
                return Err(OcpError::InvalidSchedule(format!("expected step {k1}, found {}", r.0)));
            }
            if (r.1 - k1 * t_f / n).abs() > 1e-9 * t_f {
                return Err(OcpError::InvalidSchedule(format!(
                    "step {k1}: knots must be equidistant in time"
                )));
            }
        }
        let s = Self::new(
            rows.iter().map(|r| r.2).collect(),
            rows.iter().map(|r| r.3).collect(),
            t_f,
        )?;
        Ok(s)
    }
}
