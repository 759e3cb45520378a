//! Binary field dumps: little-endian f64 values n_x, L, t, dt followed by
//! the n_x cell values.

use std::io::{self, Read, Write};

use super::SheField;

pub fn write_field<W: Write>(field: &SheField, mut w: W) -> io::Result<()> {
    for v in [field.n_x as f64, field.l, field.t, field.dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut r: R) -> io::Result<SheField> {
    let n = read_f64(&mut r)?;
    if !(n >= 1.0 && n.fract() == 0.0 && n < 1e12) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("bad cell count {n}")));
    }
    let n_x = n as usize;
    let l = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let values = (0..n_x).map(|_| read_f64(&mut r)).collect::<io::Result<Vec<_>>>()?;
    Ok(SheField { l, n_x, dt, t, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = SheField { l: 4.0, n_x: 3, dt: 0.25, t: 1.5, values: vec![1.0, 2.5, 1e-300] };
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 * 7);
        assert_eq!(&buf[0..8], &3.0f64.to_le_bytes());
        assert_eq!(read_field(&buf[..]).unwrap(), f);
        assert!(read_field(&buf[..20]).is_err());
    }
}
