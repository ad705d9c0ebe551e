use crate::error::{invalid, Result};
use crate::mpo::Mpo;
use crate::tensor::{pauli, DenseTensor};

/// `sum_j (X_j X_{j+1} + Y_j Y_{j+1} + Z_j Z_{j+1})` as a bond-5 MPO.
///
/// Bulk tensor (rows = left bond, columns = right bond):
///
/// ```text
/// [ I 0 0 0 0 ]
/// [ X 0 0 0 0 ]
/// [ Y 0 0 0 0 ]
/// [ Z 0 0 0 0 ]
/// [ 0 X Y Z I ]
/// ```
///
/// The left boundary is the last row and the right boundary the first column.
pub fn heisenberg_mpo(n: usize) -> Result<Mpo> {
    if n < 2 {
        return Err(invalid!("Heisenberg chain needs n >= 2, got {n}"));
    }
    let (id, x, y, z) = (pauli::id(), pauli::x(), pauli::y(), pauli::z());
    let zero = DenseTensor::zeros(&[2, 2]);
    let mut w: Vec<Vec<&DenseTensor>> = vec![vec![&zero; 5]; 5];
    w[0][0] = &id;
    w[1][0] = &x;
    w[2][0] = &y;
    w[3][0] = &z;
    w[4][1] = &x;
    w[4][2] = &y;
    w[4][3] = &z;
    w[4][4] = &id;
    let site = |rows: &[usize], cols: &[usize]| {
        DenseTensor::from_fn(&[rows.len(), 2, 2, cols.len()], |ix| {
            // site axes are (l, in, out, r); operators are (out, in)
            w[rows[ix[0]]][cols[ix[3]]].get(&[ix[2], ix[1]])
        })
    };
    let all = [0, 1, 2, 3, 4];
    let mut sites = Vec::with_capacity(n);
    sites.push(site(&[4], &all));
    for _ in 1..n - 1 {
        sites.push(site(&all, &all));
    }
    sites.push(site(&all, &[0]));
    Mpo::from_sites(sites)
}
