//! Why concentrated attention tolerates key quantization: the dominant-key
//! probe.
//!
//! Two single-query attention instances share one random draw of 64 keys.
//! In the first, one key's logit is lifted a fixed margin above all others
//! (a concentrated pattern, like an attention sink); the second keeps the
//! keys as drawn (a diffuse pattern). Both get their keys quantized to the
//! same width. With the margin comfortably above the logit perturbation,
//! the dominant key keeps nearly all of the softmax mass, so the score
//! error stays far below the diffuse instance's, and the top-scoring key
//! never changes.
//!
//! Run: cargo run --example dominant_key

use kvmix::attention::dominant_token_probe_detail;

fn main() {
    println!("64 keys, 32 dims, one query; 100 seeded instances per setting\n");
    println!(
        "{:>6} {:>5} {:>14} {:>14} {:>8} {:>9}",
        "margin", "bits", "mean e_a dom", "mean e_a unif", "ratio", "argmax ok"
    );

    for (margin, bits) in [(20.0, 2u8), (20.0, 4), (8.0, 2), (2.0, 2)] {
        let mut dom = 0.0f64;
        let mut unif = 0.0f64;
        let mut preserved = 0usize;
        let runs = 100u64;
        for seed in 0..runs {
            let probe = dominant_token_probe_detail(margin, bits, seed);
            dom += probe.e_a_dominant / runs as f64;
            unif += probe.e_a_uniform / runs as f64;
            preserved += usize::from(probe.argmax_preserved);
        }
        println!(
            "{margin:>6.1} {bits:>5} {dom:>14.8} {unif:>14.8} {:>7.0}x {preserved:>7}/{runs}",
            unif / dom
        );
    }

    println!(
        "\nA margin of 20 logits dwarfs 2-bit key noise, so the concentrated\n\
         pattern barely moves while the diffuse one reshuffles freely. As the\n\
         margin shrinks toward the noise scale the protection fades, which is\n\
         why diffuse-attention layers need more key bits than concentrated ones."
    );
}
