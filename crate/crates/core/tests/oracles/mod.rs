//! Reference computations written independently of the library, shared by
//! the integration tests and the acceptance run.
#![allow(dead_code)]

use musinger::display::LinkageGeometry;

/// Effector by rotating the elbow-to-elbow direction about elbow 1 by the
/// isosceles base angle, keeping the lower of the two candidates.
pub fn fk_oracle(g: &LinkageGeometry, theta1: f64, theta2: f64) -> Option<(f64, f64)> {
    let (l1, l2, d) = (g.proximal_length_mm, g.distal_length_mm, g.base_separation_mm);
    let e1 = (l1 * theta1.cos(), l1 * theta1.sin());
    let e2 = (d + l1 * theta2.cos(), l1 * theta2.sin());
    let (ux, uy) = (e2.0 - e1.0, e2.1 - e1.1);
    let span = (ux * ux + uy * uy).sqrt();
    if span == 0.0 || span > 2.0 * l2 {
        return None;
    }
    let beta = (span / (2.0 * l2)).acos();
    let (ux, uy) = (ux / span, uy / span);
    let rotate = |b: f64| {
        let (c, s) = (b.cos(), b.sin());
        (e1.0 + l2 * (c * ux - s * uy), e1.1 + l2 * (s * ux + c * uy))
    };
    let (p, q) = (rotate(beta), rotate(-beta));
    Some(if p.1 <= q.1 { p } else { q })
}

/// One-way ANOVA F by summing squared deviations observation by observation.
pub fn brute_force_f(groups: &[Vec<f64>]) -> f64 {
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        for &x in g {
            ss_between += (mean - grand) * (mean - grand);
            ss_within += (x - mean) * (x - mean);
        }
    }
    (ss_between / (k - 1) as f64) / (ss_within / (n - k) as f64)
}

/// CRC-16/CCITT-FALSE from the `crc` crate catalogue.
pub fn crc_oracle(bytes: &[u8]) -> u16 {
    crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740).checksum(bytes)
}

/// Datagram bytes assembled field by field from the documented layout.
pub fn datagram_oracle(seq: u32, timestamp_us: u64, millinewtons: [u16; 3], last: bool) -> [u8; 24] {
    let mut b = [0u8; 24];
    b[0] = 0x4D;
    b[1] = 0x53;
    b[2] = 0x01;
    b[3] = last as u8;
    b[4..8].copy_from_slice(&seq.to_be_bytes());
    b[8..16].copy_from_slice(&timestamp_us.to_be_bytes());
    for (i, mn) in millinewtons.iter().enumerate() {
        b[16 + 2 * i..18 + 2 * i].copy_from_slice(&mn.to_be_bytes());
    }
    let crc = crc_oracle(&b[..22]);
    b[22..24].copy_from_slice(&crc.to_be_bytes());
    b
}

/// Expected rounded confusion rows for the two fixture logs.
pub const NO_NOISE_TABLE: [[f64; 4]; 4] = [
    [0.96, 0.04, 0.00, 0.00],
    [0.00, 1.00, 0.00, 0.00],
    [0.00, 0.04, 0.96, 0.00],
    [0.00, 0.00, 0.00, 1.00],
];

pub const WHITE_NOISE_TABLE: [[f64; 4]; 4] = [
    [0.96, 0.00, 0.04, 0.00],
    [0.00, 0.92, 0.08, 0.00],
    [0.04, 0.13, 0.83, 0.00],
    [0.00, 0.00, 0.00, 1.00],
];

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Geometry with lengths drawn around the defaults and distal links long
/// enough to meet.
pub fn random_geometry(rng: &mut impl rand::Rng) -> LinkageGeometry {
    let d = rng.random_range(10.0..50.0);
    let l1 = rng.random_range(10.0..40.0);
    let l2 = rng.random_range((d * 0.5 + 5.0)..(d * 0.5 + 60.0));
    LinkageGeometry {
        base_separation_mm: d,
        proximal_length_mm: l1,
        distal_length_mm: l2,
        ..LinkageGeometry::default()
    }
}

/// Effector of the mirror-symmetric pose `theta1 = pi - theta2`, from
/// Pythagoras on the isosceles triangle under the elbows.
pub fn symmetric_pose_oracle(g: &LinkageGeometry, theta1: f64) -> (f64, f64) {
    let l1 = g.proximal_length_mm;
    let half = g.base_separation_mm / 2.0 - l1 * theta1.cos();
    let drop = (g.distal_length_mm.powi(2) - half * half).sqrt();
    (g.base_separation_mm / 2.0, l1 * theta1.sin() - drop)
}
