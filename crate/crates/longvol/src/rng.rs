//! Deterministic counter-based random numbers for path simulation.
//!
//! Every draw is a pure function of (seed, path, step), so worker
//! partitioning cannot reorder or split streams: path p always sees the
//! same noise no matter how many paths or threads run beside it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_A: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_B: u64 = 0x94D0_49BB_1331_11EB;
const PATH_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const STEP_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;

// 2^-52, exact
const CELL: f64 = 1.0 / 4_503_599_627_370_496.0;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_A);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_B);
    z ^ (z >> 31)
}

/// 64 uniform bits for the given counter triple.
pub fn raw(seed: u64, path: u64, step: u64) -> u64 {
    let a = mix64(seed.wrapping_add(GOLDEN));
    let b = mix64(a ^ path.wrapping_mul(PATH_SALT));
    mix64(b ^ step.wrapping_mul(STEP_SALT))
}

// Midpoints of 2^52 equal cells: every value is exactly representable and
// the result lies strictly inside (0, 1). Wider mappings (53 bits plus a
// half-cell offset) round their top cell to exactly 1.0.
fn bits_to_unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * CELL
}

/// Uniform draw on the open interval (0, 1).
pub fn uniform(seed: u64, path: u64, step: u64) -> f64 {
    bits_to_unit_open(raw(seed, path, step))
}

/// Standard normal draw via the inverse CDF, for cross-run stability.
pub fn normal(seed: u64, path: u64, step: u64) -> f64 {
    inverse_normal_cdf(uniform(seed, path, step))
}

/// Fair sign draw in {-1.0, +1.0} from the top bit.
pub fn rademacher(seed: u64, path: u64, step: u64) -> f64 {
    if raw(seed, path, step) >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wichura's PPND16 rational approximation to the standard normal
/// quantile, good to full double precision on (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile argument {p} outside (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_15e4)
            * r
            + 1.373_169_376_550_946_11e4)
            * r
            + 1.971_590_950_306_551_35e3)
            * r
            + 1.331_416_678_917_843_77e2)
            * r
            + 3.387_132_872_796_366_608;
        let den = ((((((5.226_495_278_852_854_56e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271_06e4)
            * r
            + 2.121_379_430_158_659_68e4)
            * r
            + 5.394_196_021_424_751_1e3)
            * r
            + 6.871_870_074_920_579_083e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_38)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_577;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_344_946e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_74e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_85)
            * r
            + 2.053_191_626_637_758_82)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578e-5) * r
            + 1.242_660_947_388_078_44e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_34)
            * r
            + 5.463_784_911_164_114_37)
            * r
            + 6.657_904_643_501_103_777;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_68e-5)
            * r
            + 7.868_691_311_456_132_59e-4)
            * r
            + 1.487_536_129_085_061_485e-2)
            * r
            + 1.369_298_809_227_358_05e-1)
            * r
            + 5.998_322_065_558_879_37e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}
