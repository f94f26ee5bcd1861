//! Reference implementations written without the library's code paths:
//! an exhaustive prefix packer over integers and a from-scratch MD5.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Jgs,
    Djg,
}

#[derive(Debug, Clone)]
pub struct IntResource {
    pub name: String,
    pub mips: u64,
    pub bandwidth: u64,
    pub memory: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct IntJob {
    pub id: u32,
    pub mi: u64,
    pub memory: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packing {
    pub groups: Vec<(String, Vec<u32>)>,
    pub overflow: Vec<u32>,
    pub passes: usize,
}

fn fits(jobs: &[IntJob], r: &IntResource, granularity: u64, tcomm: u64, mode: Mode) -> bool {
    let mi: u64 = jobs.iter().map(|j| j.mi).sum();
    let mem: u64 = jobs.iter().map(|j| j.memory).sum();
    let cpu = mi <= r.mips * granularity;
    match mode {
        Mode::Djg => cpu,
        Mode::Jgs => cpu && mem <= r.memory && mem <= r.bandwidth * tcomm,
    }
}

/// Each visit takes the longest prefix of the remaining jobs whose whole
/// sum fits, trying every length from the longest down.
pub fn pack(
    jobs: &[IntJob],
    resources: &[IntResource],
    granularity: u64,
    tcomm: u64,
    mode: Mode,
) -> Packing {
    let mut out = Packing {
        groups: Vec::new(),
        overflow: Vec::new(),
        passes: 0,
    };
    if resources.is_empty() {
        out.overflow = jobs.iter().map(|j| j.id).collect();
        return out;
    }
    let mut rest = jobs;
    let mut visits = 0;
    let mut misses = 0;
    while !rest.is_empty() {
        let r = &resources[visits % resources.len()];
        visits += 1;
        match (1..=rest.len())
            .rev()
            .find(|&k| fits(&rest[..k], r, granularity, tcomm, mode))
        {
            Some(k) => {
                out.groups
                    .push((r.name.clone(), rest[..k].iter().map(|j| j.id).collect()));
                rest = &rest[k..];
                misses = 0;
            }
            None => {
                misses += 1;
                if misses == resources.len() {
                    out.overflow.push(rest[0].id);
                    rest = &rest[1..];
                    misses = 0;
                }
            }
        }
    }
    out.passes = visits.div_ceil(resources.len());
    out
}

const S: [u32; 64] = [
    7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 5, 9, 14, 20, 5, 9, 14, 20, 5, 9,
    14, 20, 5, 9, 14, 20, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 6, 10, 15,
    21, 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21,
];

pub fn md5(message: &[u8]) -> [u8; 16] {
    let k: Vec<u32> = (0..64)
        .map(|i| ((i as f64 + 1.0).sin().abs() * 4_294_967_296.0) as u32)
        .collect();
    let mut data = message.to_vec();
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&((message.len() as u64).wrapping_mul(8)).to_le_bytes());

    let mut h: [u32; 4] = [0x6745_2301, 0xefcd_ab89, 0x98ba_dcfe, 0x1032_5476];
    for block in data.chunks(64) {
        let m: Vec<u32> = block
            .chunks(4)
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
            .collect();
        let [mut a, mut b, mut c, mut d] = h;
        for i in 0..64 {
            let (f, g) = match i / 16 {
                0 => ((b & c) | (!b & d), i),
                1 => ((d & b) | (!d & c), (5 * i + 1) % 16),
                2 => (b ^ c ^ d, (3 * i + 5) % 16),
                _ => (c ^ (b | !d), (7 * i) % 16),
            };
            let rotated = a
                .wrapping_add(f)
                .wrapping_add(k[i])
                .wrapping_add(m[g])
                .rotate_left(S[i]);
            (a, d, c) = (d, c, b);
            b = b.wrapping_add(rotated);
        }
        for (x, y) in h.iter_mut().zip([a, b, c, d]) {
            *x = x.wrapping_add(y);
        }
    }
    let mut out = [0u8; 16];
    for (i, word) in h.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&word.to_le_bytes());
    }
    out
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
