//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Run with `cargo test -p ntmt --test acceptance`
//! (add `-- --nocapture` to see the lines as they complete).

use std::time::Instant;

use ntmt::experiments::{
    ks_uniform_statistic, run_joint_histogram, run_rejection_histogram, ExperimentConfig,
};
use ntmt::generators::{Aes128, GeneratorKind, Mt19937};
use ntmt::jointdist::{
    joint_cdf, joint_pdf, EvenDof, JointChiSqSampler, JointParams,
};
use ntmt::matching::{exact_count_moments, standardized_counts, theoretical_sigma_sq};
use ntmt::specfun::{chi2_sf, reg_lower_gamma};
use ntmt::templates::{correlation, enumerate_aperiodic, CorrelationMatrix, Template};
use ntmt::whitening::rank_analysis;
use ntmt::generators::seed_for_index;

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {verdict} ({detail})");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn t(s: &str) -> Template {
    Template::parse(s).unwrap()
}

/// Independent aperiodicity check working on pattern strings only.
fn brute_force_aperiodic(pattern: &str) -> bool {
    let m = pattern.len();
    (1..m).all(|k| pattern[k..] != pattern[..m - k])
}

#[test]
fn criterion_01_template_enumeration() {
    let start = Instant::now();
    let nine = enumerate_aperiodic(9).unwrap();
    let mut pass = nine.len() == 148;
    let mut detail = format!("m=9 count {}", nine.len());
    for m in 2..=12u32 {
        let enumerated = enumerate_aperiodic(m).unwrap();
        let brute = (0..1u64 << m)
            .filter(|v| {
                let text: String =
                    (0..m).rev().map(|i| if v >> i & 1 == 1 { '1' } else { '0' }).collect();
                brute_force_aperiodic(&text)
            })
            .count();
        if enumerated.len() != brute {
            pass = false;
            detail = format!("m={m}: enumerated {} vs brute {}", enumerated.len(), brute);
            break;
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 1.0;
    report(
        "01 template enumeration",
        pass,
        &format!("{detail}, m=2..12 brute-force match, {elapsed:.2?}"),
    );
}

/// Overlap indicator computed from pattern strings, independent of the bit
/// arithmetic in the library.
fn brute_force_rho(t1: &str, t2: &str) -> (i64, i64) {
    let m = t1.len();
    let mut numerator = 1 - 2 * m as i64;
    for k in 1..m {
        let e_pos = (t1[..m - k] == t2[k..]) as i64;
        let e_neg = (t1[k..] == t2[..m - k]) as i64;
        numerator += (1i64 << (m - k)) * (e_pos + e_neg);
    }
    (numerator, (1i64 << m) - 2 * m as i64 + 1)
}

#[test]
fn criterion_02_correlation_values() {
    let cases = [
        ("001010101", "010101011", 0.652525, 323),
        ("001010101", "101010100", 0.321212, 159),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (a, b, published, numerator) in cases {
        let rho = correlation(t(a), t(b)).unwrap();
        let (brute_num, brute_den) = brute_force_rho(a, b);
        let exact = brute_num as f64 / brute_den as f64;
        pass &= (rho - published).abs() < 5e-7;
        pass &= brute_num == numerator && brute_den == 495;
        pass &= rho == exact;
        details.push(format!("rho({a},{b})={rho:.6} [{brute_num}/{brute_den}]"));
    }
    report("02 correlation values", pass, &details.join(", "));
}

#[test]
fn criterion_03_degenerate_pair_and_rank() {
    let start = Instant::now();
    let rho = correlation(t("100000000"), t("000000001")).unwrap();
    let mut pass = rho == 1.0;

    let all = enumerate_aperiodic(9).unwrap();
    let sigma = CorrelationMatrix::build(&all).unwrap();
    let analysis = rank_analysis(&sigma, 1e-10).unwrap();
    pass &= analysis.rank < 148;

    let groups: Vec<Vec<String>> = analysis
        .dependent_groups
        .iter()
        .map(|g| g.iter().map(|t| t.to_string()).collect())
        .collect();
    let has = |members: &[&str]| {
        groups.iter().any(|g| {
            members.iter().all(|m| g.contains(&m.to_string())) && g.len() == members.len()
        })
    };
    pass &= has(&["000000001", "100000000"]);
    pass &= has(&["011111111", "111111110"]);
    let alternating = ["001010101", "010101011", "101010100", "110101010"];
    pass &= groups.iter().any(|g| {
        !g.is_empty() && g.iter().all(|m| alternating.contains(&m.as_str()))
    });

    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 10.0;
    report(
        "03 degenerate pair and rank analysis",
        pass,
        &format!("rho=1 exactly, rank {} of 148, groups {groups:?}, {elapsed:.2?}", analysis.rank),
    );
}

#[test]
fn criterion_04_joint_cdf_factorization_and_symmetry() {
    let dof = EvenDof::new(8).unwrap();
    let zero = JointParams::new(dof, 0.0).unwrap();
    let mut worst_factor = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let x = 1.0 + 19.0 * i as f64 / 4.0;
            let y = 1.0 + 19.0 * j as f64 / 4.0;
            let f = joint_cdf(&zero, x, y).unwrap();
            let product =
                reg_lower_gamma(4.0, x / 2.0).unwrap() * reg_lower_gamma(4.0, y / 2.0).unwrap();
            worst_factor = worst_factor.max((f - product).abs());
        }
    }
    let mut worst_sym = 0.0f64;
    for rho in [0.321212, 0.652525] {
        let pos = JointParams::new(dof, rho).unwrap();
        let neg = JointParams::new(dof, -rho).unwrap();
        for (x, y) in [(1.0, 5.0), (3.0, 11.0), (8.0, 8.0), (16.0, 2.0)] {
            let f = joint_cdf(&pos, x, y).unwrap();
            worst_sym = worst_sym.max((f - joint_cdf(&pos, y, x).unwrap()).abs());
            worst_sym = worst_sym.max((f - joint_cdf(&neg, x, y).unwrap()).abs());
        }
    }
    let pass = worst_factor <= 1e-10 && worst_sym <= 1e-14;
    report(
        "04 joint cdf factorization and symmetry",
        pass,
        &format!("max factorization error {worst_factor:.2e}, max symmetry error {worst_sym:.2e}"),
    );
}

#[test]
fn criterion_05_joint_cdf_vs_monte_carlo() {
    let start = Instant::now();
    let dof = EvenDof::new(8).unwrap();
    let draws = 1_000_000usize;
    let grid = [4.0, 8.0, 14.0];
    let mut pass = true;
    let mut worst = 0.0f64;
    for (seed, rho) in [(1001u64, 0.321212), (1002, 0.652525)] {
        let params = JointParams::new(dof, rho).unwrap();
        let sample: Vec<(f64, f64)> =
            JointChiSqSampler::new(dof, rho, seed).unwrap().take(draws).collect();
        for &x in &grid {
            for &y in &grid {
                let hits = sample.iter().filter(|&&(a, b)| a <= x && b <= y).count();
                let empirical = hits as f64 / draws as f64;
                let f = joint_cdf(&params, x, y).unwrap();
                let tol = 4.0 * (f * (1.0 - f) / draws as f64).sqrt() + 1e-4;
                let err = (empirical - f).abs();
                worst = worst.max(err / tol);
                pass &= err <= tol;
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 60.0;
    report(
        "05 joint cdf vs monte carlo",
        pass,
        &format!("worst error at {:.0}% of tolerance, {elapsed:.2?}", worst * 100.0),
    );
}

/// Composite Simpson rule over a rectangle.
fn simpson_2d(
    f: &dyn Fn(f64, f64) -> f64,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    panels: usize,
) -> f64 {
    let n = panels * 2;
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let weight = |i: usize| -> f64 {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut total = 0.0;
    for i in 0..=n {
        let wx = weight(i);
        let x = x0 + i as f64 * hx;
        let mut row = 0.0;
        for j in 0..=n {
            row += weight(j) * f(x, y0 + j as f64 * hy);
        }
        total += wx * row;
    }
    total * hx * hy / 9.0
}

#[test]
fn criterion_06_density_cdf_consistency() {
    let params = JointParams::new(EvenDof::new(8).unwrap(), 0.5).unwrap();
    let integral = simpson_2d(
        &|x, y| joint_pdf(&params, x, y).unwrap(),
        (2.0, 6.0),
        (3.0, 9.0),
        128,
    );
    let rectangle = joint_cdf(&params, 6.0, 9.0).unwrap() - joint_cdf(&params, 2.0, 9.0).unwrap()
        - joint_cdf(&params, 6.0, 3.0).unwrap()
        + joint_cdf(&params, 2.0, 3.0).unwrap();
    let err = (integral - rectangle).abs();
    report(
        "06 density/cdf consistency",
        err <= 1e-6,
        &format!("quadrature {integral:.9} vs inclusion-exclusion {rectangle:.9}, diff {err:.2e}"),
    );
}

fn acceptance_fig1_config() -> ExperimentConfig {
    ExperimentConfig {
        generator: GeneratorKind::Mt19937,
        sequences: 20_000,
        sequence_bits: 100_000,
        blocks: 8,
        grid: 10,
        alpha: 0.01,
        base_seed: 42,
        workers: 0,
    }
}

#[test]
fn criterion_07_joint_histogram_reproduction() {
    let start = Instant::now();
    let config = acceptance_fig1_config();
    let mut pass = true;
    let mut details = Vec::new();
    for (a, b) in [("001010101", "010101011"), ("001010101", "101010100")] {
        let rep = run_joint_histogram(&config, t(a), t(b)).unwrap();
        pass &= rep.fit.p_value > 1e-3;
        details.push(format!("{a}/{b}: gof p={:.4}", rep.fit.p_value));
    }
    let elapsed = start.elapsed();
    details.push(format!("{elapsed:.2?}"));
    report("07 joint histogram reproduction", pass, &details.join(", "));
}

#[test]
fn criterion_08_dependence_detectable() {
    let config = acceptance_fig1_config();
    let rep = run_joint_histogram(&config, t("001010101"), t("010101011")).unwrap();
    let freq = rep.corner_frequency();
    let se = (freq * (1.0 - freq) / config.sequences as f64).sqrt();
    let excess = freq - 0.01;
    let pass = excess >= 5.0 * se;
    report(
        "08 dependence detectable pre-transform",
        pass,
        &format!(
            "corner frequency {freq:.5} vs independence 0.01, excess {:.1} standard errors",
            excess / se
        ),
    );
}

#[test]
fn criterion_09_rejection_histogram_contrast() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for generator in [GeneratorKind::Mt19937, GeneratorKind::Aes128Ctr] {
        let config = ExperimentConfig {
            generator,
            sequences: 10_000,
            sequence_bits: 100_000,
            blocks: 8,
            grid: 10,
            alpha: 0.01,
            base_seed: 42,
            workers: 0,
        };
        let post = run_rejection_histogram(&config, true).unwrap();
        let pre = run_rejection_histogram(&config, false).unwrap();
        pass &= post.fit.p_value > 1e-3;
        pass &= pre.fit.p_value < 1e-3;
        details.push(format!(
            "{generator}: post p={:.3} pre p={:.1e}",
            post.fit.p_value, pre.fit.p_value
        ));
    }
    let elapsed = start.elapsed();
    details.push(format!("{elapsed:.2?}"));
    report("09 rejection histogram contrast", pass, &details.join(", "));
}

#[test]
fn criterion_10_pvalue_uniformity() {
    let start = Instant::now();
    let sequences = 10_000usize;
    let bits = 100_000usize;
    let blocks = 8usize;
    let templates = [t("001010101"), t("010101011"), t("101010100")];
    // One corpus pass computes all three template p-values per sequence.
    let mut p_values: Vec<Vec<f64>> = vec![Vec::with_capacity(sequences); 3];
    for i in 0..sequences {
        let spec = seed_for_index(GeneratorKind::Mt19937, 42, i as u64);
        let seq = spec.generate(bits);
        let std = standardized_counts(&seq, &templates, blocks).unwrap();
        for (r, store) in p_values.iter_mut().enumerate() {
            store.push(chi2_sf(blocks as u32, std.chi_obs(r)).unwrap());
        }
    }
    let threshold = 1.63 / (sequences as f64).sqrt();
    let mut pass = true;
    let mut details = Vec::new();
    for (template, ps) in templates.iter().zip(&p_values) {
        let d = ks_uniform_statistic(ps);
        pass &= d < threshold;
        details.push(format!("{template}: D={d:.4}"));
    }
    let elapsed = start.elapsed();
    details.push(format!("threshold {threshold:.4}, {elapsed:.2?}"));
    report("10 p-value uniformity", pass, &details.join(", "));
}

#[test]
fn criterion_11_exact_moment_oracle() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for (block_len, m, pattern) in [(10usize, 3u32, "001"), (12, 3, "001"), (12, 4, "0011")] {
        let template = t(pattern);
        let windows = (block_len - m as usize + 1) as i128;
        // Integer enumeration over every block.
        let mask = (1u64 << m) - 1;
        let mut sum = 0i128;
        let mut sum_sq = 0i128;
        for block in 0u64..1 << block_len {
            let mut c = 0i128;
            for k in 0..windows as usize {
                if (block >> (block_len - m as usize - k)) & mask == template.value() as u64 {
                    c += 1;
                }
            }
            sum += c;
            sum_sq += c * c;
        }
        // Exact rational comparison: clear denominators so everything is
        // integer arithmetic.
        let pow_m = 1i128 << m;
        let pow_2m = 1i128 << (2 * m);
        let pow_len = 1i128 << block_len;
        // mean = windows / 2^m  vs  sum / 2^M
        pass &= sum * pow_m == windows * pow_len;
        // variance numerator over 2^(2m): W(2^m - 2m + 1) + m(m-1)
        let var_num = windows * (pow_m - 2 * m as i128 + 1) + (m * (m - 1)) as i128;
        // empirical variance = sum_sq/2^M - (sum/2^M)^2; compare over 2^(2M)
        let lhs = (sum_sq * pow_len - sum * sum) * pow_2m;
        let rhs = var_num * pow_len * pow_len;
        pass &= lhs == rhs;
        // And the double-precision closed form agrees bit for bit.
        let (mean_f, var_f) = exact_count_moments(block_len, m, template).unwrap();
        pass &= mean_f == windows as f64 / pow_m as f64;
        pass &= var_f == var_num as f64 / pow_2m as f64;
        // Large-block variance misses by exactly the analytic constant gap.
        let gap = ((m - 1) as f64) * ((pow_m - 3 * m as i128 + 1) as f64) / pow_2m as f64;
        let approx = theoretical_sigma_sq(block_len, m).unwrap();
        pass &= (approx - var_f - gap).abs() < 1e-14;
        details.push(format!("(M={block_len},m={m}) exact"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 5.0;
    details.push(format!("{elapsed:.2?}"));
    report("11 exact moment oracle", pass, &details.join(", "));
}

#[test]
fn criterion_12_generator_vectors() {
    // Published first outputs of the standard 32-bit Mersenne Twister,
    // default seed.
    let expected_mt: [u32; 10] = [
        3499211612, 581869302, 3890346734, 3586334585, 545404204, 4161255391, 3922919429,
        949333985, 2715962298, 1323567403,
    ];
    let mut mt = Mt19937::new(5489);
    let mt_ok = expected_mt.iter().all(|&e| mt.next_u32() == e);

    // FIPS-197 appendix C.1 vector.
    let key: [u8; 16] = [
        0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d,
        0x0e, 0x0f,
    ];
    let plain: [u8; 16] = [
        0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd,
        0xee, 0xff,
    ];
    let cipher: [u8; 16] = [
        0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4,
        0xc5, 0x5a,
    ];
    let aes_ok = Aes128::new(&key).encrypt_block(&plain) == cipher;

    report(
        "12 generator vectors",
        mt_ok && aes_ok,
        &format!("mt19937 first 10 outputs {mt_ok}, aes-128 fips vector {aes_ok}"),
    );
}
