//! Flat binary path records.

use std::io::{Read, Write};

use super::DysonError;

/// Paths read back from [`super::Ensemble::write_path_dump`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub n: usize,
    pub slots: usize,
    pub replicas: usize,
    pub dt: f64,
    /// `[replica][slot][particle]`.
    pub positions: Vec<f64>,
}

pub(super) fn write_dump<W: Write>(
    mut w: W,
    n: usize,
    slots: usize,
    replicas: usize,
    dt: f64,
    positions: &[f64],
) -> Result<(), DysonError> {
    for v in [n as f64, (slots - 1) as f64, replicas as f64, dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in positions {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn as_count(v: f64, what: &str) -> Result<usize, DysonError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(DysonError::Dump(format!("{what} = {v} is not a count")))
    }
}

pub fn read_path_dump<R: Read>(mut r: R) -> Result<PathDump, DysonError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 || bytes.len() < 32 {
        return Err(DysonError::Dump(format!("{} bytes is not a whole record", bytes.len())));
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let n = as_count(values[0], "N")?;
    let slots = as_count(values[1], "T")? + 1;
    let replicas = as_count(values[2], "M")?;
    let positions = values[4..].to_vec();
    if positions.len() != n * slots * replicas {
        return Err(DysonError::Dump(format!(
            "expected {} positions for N={n}, T+1={slots}, M={replicas}, found {}",
            n * slots * replicas,
            positions.len()
        )));
    }
    Ok(PathDump { n, slots, replicas, dt: values[3], positions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pos: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 1.0).collect();
        let mut buf = Vec::new();
        write_dump(&mut buf, 2, 3, 2, 0.25, &pos).unwrap();
        assert_eq!(buf.len(), 8 * (4 + 12));
        let d = read_path_dump(buf.as_slice()).unwrap();
        assert_eq!((d.n, d.slots, d.replicas, d.dt), (2, 3, 2, 0.25));
        assert_eq!(d.positions, pos);
    }

    #[test]
    fn truncated_record_is_rejected() {
        let mut buf = Vec::new();
        write_dump(&mut buf, 2, 3, 2, 0.25, &[0.0; 12]).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(matches!(read_path_dump(buf.as_slice()), Err(DysonError::Dump(_))));
    }
}
