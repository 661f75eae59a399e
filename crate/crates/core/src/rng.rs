//! Fixed, platform-independent pseudo-random generator used for every
//! shuffle and sampling decision in the toolkit.
//!
//! The generator is xoshiro256** whose 256-bit state is filled by four
//! consecutive outputs of splitmix64. A generator is addressed by a
//! `(seed, stream)` pair; the splitmix64 start state is
//! `seed ^ mix64(stream + 1)`, where `mix64` is the splitmix64 output
//! finalizer. Stage `i` of a curriculum uses stream `i`.
//!
//! Bounded draws use rejection sampling on the full 64-bit output, so
//! `below(n)` is exactly uniform. Unit-interval draws take the top 53 bits.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

/// xoshiro256** seeded through splitmix64.
#[derive(Debug, Clone)]
pub struct StageRng {
    s: [u64; 4],
}

impl StageRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut sm = SplitMix64::new(seed ^ mix64(stream.wrapping_add(1)));
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below() needs a positive bound");
        // Smallest accepted value; everything under it would bias the modulo.
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    /// Uniform double in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// In-place Fisher–Yates shuffle (Durstenfeld variant, high index downwards).
pub fn fisher_yates<T>(items: &mut [T], rng: &mut StageRng) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Shuffle with a freshly addressed generator.
pub fn shuffle_with<T>(items: &mut [T], seed: u64, stream: u64) {
    let mut rng = StageRng::new(seed, stream);
    fisher_yates(items, &mut rng);
}
