//! Time series containers shared by the oscillator observables.

use std::io::Write;

use num_complex::Complex64;

use crate::error::Result;
use crate::harness::csv::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl ComplexSeries {
    pub fn modulus_sqr(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Writes `t, re, im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re,im")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}
