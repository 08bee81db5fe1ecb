//! Regenerates `data/coefficients.csv` by direct quadrature of the filter
//! integral. Run with `cargo run --release --example coefficient_table`.

use qnoise::pulse_filter::{
    coefficient_table_csv, coefficient_table_from_csv, zeta_quadrature, CutoffShape, DephasingCoefficient,
    PulseSequence, SpectralModel,
};

fn main() -> qnoise::Result<()> {
    let cases: Vec<(PulseSequence, Vec<f64>)> = vec![
        (PulseSequence::fid(), vec![-0.5, 0.3, 0.5]),
        (PulseSequence::hahn(), vec![0.3, 0.5, 1.0, 1.5, 2.0, 2.5]),
        (PulseSequence::cpmg(2), vec![0.3, 0.5, 1.0, 1.5, 2.0, 2.5]),
        (PulseSequence::cpmg(3), vec![0.5, 1.0]),
        (PulseSequence::new(vec![0.2, 0.5, 0.9])?, vec![0.3, 0.5]),
        (PulseSequence::udd(3), vec![0.5, 1.5]),
    ];
    let mut rows = Vec::new();
    for (sequence, ps) in cases {
        for p in ps {
            rows.push(DephasingCoefficient { value: f64::NAN, sequence: sequence.clone(), p });
        }
    }
    // round-trip so quadrature sees the pulse times exactly as stored
    let rows = coefficient_table_from_csv(&coefficient_table_csv(&rows))?;
    let mut out = Vec::new();
    for row in rows {
        let spec = SpectralModel::new(row.p, 1.0, 1e-30, CutoffShape::FlattenBelow)?;
        let value = zeta_quadrature(&spec, &row.sequence, 1.0)?;
        out.push(DephasingCoefficient { value, ..row });
    }
    print!("{}", coefficient_table_csv(&out));
    Ok(())
}
