//! Seedable xorshift64* generator producing uniforms on `[0, 1)`.
//!
//! The recurrence and the float conversion are fixed so that any
//! implementation with 64-bit integers and IEEE doubles reproduces the same
//! stream bit for bit.

/// Golden-ratio constant used to scramble seeds.
pub const SEED_SCRAMBLE: u64 = 0x9E37_79B9_7F4A_7C15;

const OUTPUT_MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;
const INV_2_POW_53: f64 = 1.0 / (1u64 << 53) as f64;

/// State of the xorshift64* recurrence. Never zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GeneratorState {
    state: u64,
}

impl GeneratorState {
    /// Seeds a generator: `seed ^ SEED_SCRAMBLE`, falling back to the
    /// constant itself when the XOR is zero.
    pub fn from_seed(seed: u64) -> Self {
        let state = seed ^ SEED_SCRAMBLE;
        Self {
            state: if state == 0 { SEED_SCRAMBLE } else { state },
        }
    }

    /// Wraps a raw state word. Returns `None` for the fixed point 0.
    pub fn from_raw(state: u64) -> Option<Self> {
        (state != 0).then_some(Self { state })
    }

    pub fn raw(&self) -> u64 {
        self.state
    }

    /// Advances one step and returns the raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.state;
        assert!(s != 0, "xorshift64* state reached the zero fixed point");
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(OUTPUT_MULTIPLIER)
    }

    /// Advances one step and returns the top 53 output bits scaled into `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_POW_53
    }
}

/// Free-function form of [`GeneratorState::from_seed`].
pub fn seed_generator(seed: u64) -> GeneratorState {
    GeneratorState::from_seed(seed)
}

/// Pure form of one generator step: returns the uniform and the next state.
pub fn next_uniform(state: GeneratorState) -> (f64, GeneratorState) {
    let mut next = state;
    let u = next.next_uniform();
    (u, next)
}

/// Derives the seed of an independent stream from a base seed with the
/// splitmix64 finalizer, so that e.g. the Monte Carlo and shift tapes of one
/// experiment never share cells.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(SEED_SCRAMBLE));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Iterator over the uniforms of one seed.
#[derive(Clone, Debug)]
pub struct Uniforms(GeneratorState);

impl Uniforms {
    pub fn new(seed: u64) -> Self {
        Self(GeneratorState::from_seed(seed))
    }
}

impl Iterator for Uniforms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.0.next_uniform())
    }
}
