//! Image output for matrices: binary PBM and SVG, row 0 at the top.

use crate::matrix::BinaryMatrix;

/// Side of one cell in SVG user units.
pub const SVG_CELL: usize = 10;

/// Binary PBM (`P4`). Ones are black; each row is packed MSB-first and
/// padded to a whole byte.
pub fn to_pbm(mat: &BinaryMatrix) -> Vec<u8> {
    let (m, n) = mat.dims();
    let mut out = format!("P4\n{n} {m}\n").into_bytes();
    let stride = n.div_ceil(8);
    for i in 0..m {
        let mut row = vec![0u8; stride];
        for j in 0..n {
            if mat.get(i, j) {
                row[j / 8] |= 0x80 >> (j % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn to_svg(mat: &BinaryMatrix) -> String {
    let (m, n) = mat.dims();
    let (w, h) = (n * SVG_CELL, m * SVG_CELL);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    for (i, j) in mat.ones_positions() {
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{SVG_CELL}\" height=\"{SVG_CELL}\" fill=\"black\"/>\n",
            j * SVG_CELL,
            i * SVG_CELL
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::seed_bank;

    fn pbm_payload(bytes: &[u8]) -> (&str, &[u8]) {
        let mut newlines = 0;
        let split = bytes
            .iter()
            .position(|&b| {
                newlines += (b == b'\n') as usize;
                newlines == 2
            })
            .unwrap();
        (std::str::from_utf8(&bytes[..=split]).unwrap(), &bytes[split + 1..])
    }

    /// Decodes a P4 payload back into a matrix.
    fn decode(bytes: &[u8]) -> BinaryMatrix {
        let (header, payload) = pbm_payload(bytes);
        let dims: Vec<usize> = header.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        let (n, m) = (dims[0], dims[1]);
        let stride = n.div_ceil(8);
        assert_eq!(payload.len(), m * stride);
        BinaryMatrix::from_fn(m, n, |i, j| payload[i * stride + j / 8] & (0x80 >> (j % 8)) != 0)
    }

    #[test]
    fn identity_payload() {
        let id = BinaryMatrix::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        let pbm = to_pbm(&id);
        let (header, payload) = pbm_payload(&pbm);
        assert_eq!(header, "P4\n2 2\n");
        assert_eq!(payload, &[0b1000_0000, 0b0100_0000]);
    }

    #[test]
    fn fixture_image() {
        let m = seed_bank(8, 23).unwrap();
        let pbm = to_pbm(&m);
        assert!(pbm.starts_with(b"P4\n23 8\n"));
        let back = decode(&pbm);
        assert_eq!(back, m);
        assert_eq!(back.count_ones(), 94);
        let svg = to_svg(&m);
        assert_eq!(svg.matches("fill=\"black\"").count(), 94);
        assert!(svg.contains("width=\"230\" height=\"80\""));
    }

    #[test]
    fn zero_matrix_is_white() {
        let z = BinaryMatrix::zeros(3, 9);
        let pbm = to_pbm(&z);
        let (_, payload) = pbm_payload(&pbm);
        assert!(payload.iter().all(|&b| b == 0));
        assert_eq!(payload.len(), 6);
        assert_eq!(to_svg(&z).matches("fill=\"black\"").count(), 0);
    }
}
