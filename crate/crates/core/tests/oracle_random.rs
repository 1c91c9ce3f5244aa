mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use segmin::oracle::check_pipeline;
use segmin::{Grid, Variant};

#[test]
fn random_frames_match_brute_force_at_every_stage() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9);
    for k in 0..200 {
        let frame = common::random_frame(&mut rng);
        for variant in Variant::ALL {
            if let Err(m) = check_pipeline(&frame.masks, &frame.depth, &frame.config(variant), 1e-9) {
                panic!("pair {k} ({}x{}, {variant}): {m}", frame.width(), frame.depth.height());
            }
        }
    }
}
