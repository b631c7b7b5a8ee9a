//! Deterministic bit-sequence generators for the experiment harness:
//! the 32-bit Mersenne Twister and AES-128 in counter mode.
//!
//! Both generators emit bytes; bits are taken from each byte most
//! significant first. The Mersenne Twister emits each 32-bit output word
//! as four big-endian bytes, and the counter mode encrypts a 128-bit
//! big-endian counter that increments by one per block.

use serde::{Deserialize, Serialize};

use crate::bitstream::{BitOrder, BitSequence};

/// Which generator family a spec belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Mt19937,
    Aes128Ctr,
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeneratorKind::Mt19937 => write!(f, "mt19937"),
            GeneratorKind::Aes128Ctr => write!(f, "aes128_ctr"),
        }
    }
}

/// Seed material that fully determines an output stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Mt19937 { seed: u32 },
    Aes128Ctr { key: [u8; 16], counter: [u8; 16] },
}

impl GeneratorSpec {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            GeneratorSpec::Mt19937 { .. } => GeneratorKind::Mt19937,
            GeneratorSpec::Aes128Ctr { .. } => GeneratorKind::Aes128Ctr,
        }
    }

    /// First `n_bits` of the generator's stream.
    pub fn generate(&self, n_bits: usize) -> BitSequence {
        let n_bytes = n_bits.div_ceil(8);
        let bytes = match self {
            GeneratorSpec::Mt19937 { seed } => Mt19937::new(*seed).bytes(n_bytes),
            GeneratorSpec::Aes128Ctr { key, counter } => {
                Aes128Ctr::new(key, *counter).bytes(n_bytes)
            }
        };
        let mut seq = BitSequence::from_bytes(&bytes, BitOrder::MsbFirst);
        seq.truncate(n_bits);
        seq
    }
}

/// SplitMix-style finalizer used to decorrelate per-index seeds.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the spec for sequence `index` of an experiment.
///
/// Mersenne Twister streams get independently mixed seeds; counter-mode
/// streams share one key derived from the base seed and start `2^64`
/// counter blocks apart, so streams shorter than `2^64` blocks never
/// overlap.
pub fn seed_for_index(kind: GeneratorKind, base_seed: u64, index: u64) -> GeneratorSpec {
    match kind {
        GeneratorKind::Mt19937 => {
            let mixed = mix64(base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)));
            GeneratorSpec::Mt19937 { seed: mixed as u32 }
        }
        GeneratorKind::Aes128Ctr => {
            let hi = mix64(base_seed ^ 0x243F_6A88_85A3_08D3);
            let lo = mix64(base_seed ^ 0x1319_8A2E_0370_7344);
            let mut key = [0u8; 16];
            key[..8].copy_from_slice(&hi.to_be_bytes());
            key[8..].copy_from_slice(&lo.to_be_bytes());
            let counter = ((index as u128) << 64).to_be_bytes();
            GeneratorSpec::Aes128Ctr { key, counter }
        }
    }
}

/// The standard 32-bit Mersenne Twister (period parameters 624/397).
pub struct Mt19937 {
    state: [u32; 624],
    index: usize,
}

impl Mt19937 {
    const N: usize = 624;
    const M: usize = 397;
    const MATRIX_A: u32 = 0x9908_B0DF;
    const UPPER_MASK: u32 = 0x8000_0000;
    const LOWER_MASK: u32 = 0x7FFF_FFFF;

    pub fn new(seed: u32) -> Self {
        let mut state = [0u32; Self::N];
        state[0] = seed;
        for i in 1..Self::N {
            state[i] = 1_812_433_253u32
                .wrapping_mul(state[i - 1] ^ (state[i - 1] >> 30))
                .wrapping_add(i as u32);
        }
        Mt19937 { state, index: Self::N }
    }

    fn twist(&mut self) {
        for i in 0..Self::N {
            let x = (self.state[i] & Self::UPPER_MASK)
                | (self.state[(i + 1) % Self::N] & Self::LOWER_MASK);
            let mut xa = x >> 1;
            if x & 1 != 0 {
                xa ^= Self::MATRIX_A;
            }
            self.state[i] = self.state[(i + Self::M) % Self::N] ^ xa;
        }
        self.index = 0;
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.index >= Self::N {
            self.twist();
        }
        let mut y = self.state[self.index];
        self.index += 1;
        y ^= y >> 11;
        y ^= (y << 7) & 0x9D2C_5680;
        y ^= (y << 15) & 0xEFC6_0000;
        y ^ (y >> 18)
    }

    /// First `n` bytes of the stream, each output word big-endian.
    fn bytes(&mut self, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n.div_ceil(4) * 4);
        while out.len() < n {
            out.extend_from_slice(&self.next_u32().to_be_bytes());
        }
        out.truncate(n);
        out
    }
}

const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab,
    0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4,
    0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71,
    0xd8, 0x31, 0x15, 0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6,
    0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb,
    0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf, 0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45,
    0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44,
    0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73, 0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a,
    0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49,
    0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08, 0xba, 0x78, 0x25,
    0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e,
    0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1,
    0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb,
    0x16,
];

#[inline]
fn xtime(b: u8) -> u8 {
    (b << 1) ^ (((b >> 7) & 1) * 0x1B)
}

/// AES-128 block encryption (encrypt-only; this is a keystream source, not
/// a general cipher implementation).
pub struct Aes128 {
    round_keys: [u32; 44],
}

impl Aes128 {
    pub fn new(key: &[u8; 16]) -> Self {
        let mut w = [0u32; 44];
        for i in 0..4 {
            w[i] = u32::from_be_bytes([key[4 * i], key[4 * i + 1], key[4 * i + 2], key[4 * i + 3]]);
        }
        let mut rcon: u8 = 1;
        for i in 4..44 {
            let mut temp = w[i - 1];
            if i % 4 == 0 {
                temp = Self::sub_word(temp.rotate_left(8)) ^ ((rcon as u32) << 24);
                rcon = xtime(rcon);
            }
            w[i] = w[i - 4] ^ temp;
        }
        Aes128 { round_keys: w }
    }

    fn sub_word(w: u32) -> u32 {
        let b = w.to_be_bytes();
        u32::from_be_bytes([
            SBOX[b[0] as usize],
            SBOX[b[1] as usize],
            SBOX[b[2] as usize],
            SBOX[b[3] as usize],
        ])
    }

    fn add_round_key(&self, state: &mut [u8; 16], round: usize) {
        for c in 0..4 {
            let k = self.round_keys[4 * round + c].to_be_bytes();
            for r in 0..4 {
                state[4 * c + r] ^= k[r];
            }
        }
    }

    fn sub_bytes(state: &mut [u8; 16]) {
        for b in state.iter_mut() {
            *b = SBOX[*b as usize];
        }
    }

    // State bytes are kept in input order: byte i sits at row i % 4 of
    // column i / 4, so row r of column c is state[4c + r].
    fn shift_rows(state: &mut [u8; 16]) {
        let old = *state;
        for r in 1..4 {
            for c in 0..4 {
                state[4 * c + r] = old[4 * ((c + r) % 4) + r];
            }
        }
    }

    fn mix_columns(state: &mut [u8; 16]) {
        for c in 0..4 {
            let col = &mut state[4 * c..4 * c + 4];
            let (a0, a1, a2, a3) = (col[0], col[1], col[2], col[3]);
            let t = a0 ^ a1 ^ a2 ^ a3;
            col[0] = a0 ^ t ^ xtime(a0 ^ a1);
            col[1] = a1 ^ t ^ xtime(a1 ^ a2);
            col[2] = a2 ^ t ^ xtime(a2 ^ a3);
            col[3] = a3 ^ t ^ xtime(a3 ^ a0);
        }
    }

    pub fn encrypt_block(&self, input: &[u8; 16]) -> [u8; 16] {
        let mut state = *input;
        self.add_round_key(&mut state, 0);
        for round in 1..10 {
            Self::sub_bytes(&mut state);
            Self::shift_rows(&mut state);
            Self::mix_columns(&mut state);
            self.add_round_key(&mut state, round);
        }
        Self::sub_bytes(&mut state);
        Self::shift_rows(&mut state);
        self.add_round_key(&mut state, 10);
        state
    }
}

/// AES-128 keystream over an incrementing big-endian counter.
pub struct Aes128Ctr {
    cipher: Aes128,
    counter: [u8; 16],
}

impl Aes128Ctr {
    pub fn new(key: &[u8; 16], counter: [u8; 16]) -> Self {
        Aes128Ctr { cipher: Aes128::new(key), counter }
    }

    fn increment(&mut self) {
        for b in self.counter.iter_mut().rev() {
            *b = b.wrapping_add(1);
            if *b != 0 {
                break;
            }
        }
    }

    fn bytes(&mut self, n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n.div_ceil(16) * 16);
        while out.len() < n {
            out.extend_from_slice(&self.cipher.encrypt_block(&self.counter));
            self.increment();
        }
        out.truncate(n);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference first outputs of the standard 32-bit Mersenne Twister with
    /// the default seed 5489.
    const MT_REFERENCE: [u32; 10] = [
        3499211612, 581869302, 3890346734, 3586334585, 545404204, 4161255391, 3922919429,
        949333985, 2715962298, 1323567403,
    ];

    #[test]
    fn mt19937_reference_outputs() {
        let mut mt = Mt19937::new(5489);
        for (i, &expect) in MT_REFERENCE.iter().enumerate() {
            assert_eq!(mt.next_u32(), expect, "output {i}");
        }
    }

    fn hex(bytes: &[u8]) -> String {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn from_hex(s: &str) -> [u8; 16] {
        let mut out = [0u8; 16];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            out[i] = u8::from_str_radix(std::str::from_utf8(chunk).unwrap(), 16).unwrap();
        }
        out
    }

    #[test]
    fn aes128_fips197_appendix_c() {
        let key = from_hex("000102030405060708090a0b0c0d0e0f");
        let plain = from_hex("00112233445566778899aabbccddeeff");
        let aes = Aes128::new(&key);
        assert_eq!(hex(&aes.encrypt_block(&plain)), "69c4e0d86a7b0430d8cdb78070b4c55a");
    }

    #[test]
    fn aes128_fips197_appendix_b() {
        let key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
        let plain = from_hex("3243f6a8885a308d313198a2e0370734");
        let aes = Aes128::new(&key);
        assert_eq!(hex(&aes.encrypt_block(&plain)), "3925841d02dc09fbdc118597196a0b32");
    }

    #[test]
    fn ctr_counts_big_endian() {
        let key = from_hex("000102030405060708090a0b0c0d0e0f");
        let mut start = [0u8; 16];
        start[15] = 0xFF;
        let mut ctr = Aes128Ctr::new(&key, start);
        let stream = ctr.bytes(32);
        let aes = Aes128::new(&key);
        let mut second = [0u8; 16];
        second[14] = 0x01;
        assert_eq!(&stream[..16], &aes.encrypt_block(&start));
        assert_eq!(&stream[16..], &aes.encrypt_block(&second));
    }

    #[test]
    fn generate_mt_bit_order() {
        let spec = GeneratorSpec::Mt19937 { seed: 5489 };
        let seq = spec.generate(32);
        let mut word = 0u32;
        for i in 0..32 {
            word = (word << 1) | seq.get(i) as u32;
        }
        assert_eq!(word, MT_REFERENCE[0]);
    }

    #[test]
    fn generate_aes_fips_vector_bits() {
        let spec = GeneratorSpec::Aes128Ctr {
            key: from_hex("000102030405060708090a0b0c0d0e0f"),
            counter: from_hex("00112233445566778899aabbccddeeff"),
        };
        let seq = spec.generate(128);
        let bytes = seq.to_bytes(crate::bitstream::BitOrder::MsbFirst);
        assert_eq!(hex(&bytes), "69c4e0d86a7b0430d8cdb78070b4c55a");
    }

    #[test]
    fn generate_empty() {
        let spec = GeneratorSpec::Mt19937 { seed: 1 };
        assert_eq!(spec.generate(0).len(), 0);
    }

    #[test]
    fn generate_truncates_to_bit_count() {
        let spec = GeneratorSpec::Mt19937 { seed: 1 };
        let seq = spec.generate(13);
        assert_eq!(seq.len(), 13);
        let full = spec.generate(32);
        for i in 0..13 {
            assert_eq!(seq.get(i), full.get(i));
        }
    }

    #[test]
    fn seed_for_index_properties() {
        for kind in [GeneratorKind::Mt19937, GeneratorKind::Aes128Ctr] {
            let a = seed_for_index(kind, 7, 0);
            let b = seed_for_index(kind, 7, 1);
            assert_ne!(a, b);
            assert_eq!(a, seed_for_index(kind, 7, 0));
        }
    }

    #[test]
    fn aes_indices_offset_counters() {
        let a = seed_for_index(GeneratorKind::Aes128Ctr, 7, 0);
        let b = seed_for_index(GeneratorKind::Aes128Ctr, 7, 1);
        match (a, b) {
            (
                GeneratorSpec::Aes128Ctr { key: ka, counter: ca },
                GeneratorSpec::Aes128Ctr { key: kb, counter: cb },
            ) => {
                assert_eq!(ka, kb);
                assert_eq!(u128::from_be_bytes(ca), 0);
                assert_eq!(u128::from_be_bytes(cb), 1u128 << 64);
            }
            _ => unreachable!(),
        }
    }
}
