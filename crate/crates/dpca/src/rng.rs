//! Counter-based 64-bit random streams. Each stream is keyed by
//! (master_seed, machine_index, replicate_index) so simulated machines can
//! sample in parallel without shared state and still be bit-reproducible.

/// SplitMix64 sequence.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Fair coin as +/-1.
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        // u in (0,1] to keep ln finite
        let u = loop {
            let x = self.next_f64();
            if x > 0.0 {
                break x;
            }
        };
        let v = self.next_f64();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * v;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Stream identity: identical `SeedSpec` implies a bit-identical sample stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub machine_index: u64,
    pub replicate_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, machine_index: u64, replicate_index: u64) -> Self {
        SeedSpec {
            master_seed,
            machine_index,
            replicate_index,
        }
    }

    /// Collapse the key into one 64-bit state with avalanche mixing so that
    /// neighboring keys produce unrelated streams.
    pub fn stream(&self) -> SplitMix64 {
        let mut mixer = SplitMix64::new(self.master_seed);
        let a = mixer.next_u64();
        let mut mixer = SplitMix64::new(a ^ self.machine_index.wrapping_mul(0xA24B_AED4_963E_E407));
        let b = mixer.next_u64();
        let mut mixer =
            SplitMix64::new(b ^ self.replicate_index.wrapping_mul(0x9FB2_1C65_1E98_DF25));
        SplitMix64::new(mixer.next_u64())
    }
}

/// Mix two 64-bit values into one; used to derive per-(n, replicate) keys.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut s = SplitMix64::new(a ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    s.next_u64()
}
