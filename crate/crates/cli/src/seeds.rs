//! Per-run seed derivation.
//!
//! A run seed is `splitmix64(master ⊕ splitmix64(fnv1a(tag) + index))`.
//! Seeds depend only on `(master, tag, index)`, so adding repetitions or
//! grid points never changes the seeds of existing runs.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(tag).wrapping_add(index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let seeds: HashSet<u64> = ["data", "noise"]
            .iter()
            .flat_map(|t| (0..100).map(move |i| derive(7, t, i)))
            .collect();
        assert_eq!(seeds.len(), 200);
        assert_eq!(derive(7, "data", 3), derive(7, "data", 3));
        assert_ne!(derive(7, "data", 3), derive(8, "data", 3));
    }
}
