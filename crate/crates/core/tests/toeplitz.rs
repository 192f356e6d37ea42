use passive_qkd::toeplitz::{modified_seed_len, modified_toeplitz_hash, toeplitz_hash, ToeplitzSpec};
use passive_qkd::BitString;

fn bits(v: u64, n: usize) -> BitString {
    (0..n).map(|i| (v >> i) & 1 == 1).collect()
}

/// Dense matrix-vector product with T[i][j] = seed[i - j + n_in - 1].
fn dense(seed: &BitString, n_in: usize, n_out: usize, x: &BitString) -> BitString {
    (0..n_out)
        .map(|i| {
            (0..n_in).fold(false, |acc, j| {
                acc ^ (seed.get(i + n_in - 1 - j).unwrap() & x.get(j).unwrap())
            })
        })
        .collect()
}

#[test]
fn exhaustive_small_shapes() {
    for n_in in 1..=6usize {
        for n_out in 0..=n_in.min(4) {
            let sl = n_in + n_out - 1;
            for s in 0..(1u64 << sl) {
                let seed = bits(s, sl);
                let spec = ToeplitzSpec::new(n_in, n_out, seed.clone()).unwrap();
                for x in 0..(1u64 << n_in) {
                    let x = bits(x, n_in);
                    assert_eq!(toeplitz_hash(&spec, &x).unwrap(), dense(&seed, n_in, n_out, &x));
                }
            }
        }
    }
}

#[test]
fn exhaustive_modified_shapes() {
    for n_in in 1..=6usize {
        for n_out in 0..=n_in.min(4) {
            let sl = modified_seed_len(n_in, n_out);
            for s in 0..(1u64 << sl) {
                let seed = bits(s, sl);
                for x in 0..(1u64 << n_in) {
                    let x = bits(x, n_in);
                    let got = modified_toeplitz_hash(&seed, n_out, &x).unwrap();
                    let expect: BitString = if n_out == 0 || n_out == n_in {
                        x.slice(0..n_out).unwrap()
                    } else {
                        // [I | T] with T of shape n_out x (n_in - n_out)
                        let rest = x.slice(n_out..n_in).unwrap();
                        let t = dense(&seed, n_in - n_out, n_out, &rest);
                        (0..n_out).map(|i| x.get(i).unwrap() ^ t.get(i).unwrap()).collect()
                    };
                    assert_eq!(got, expect, "n_in {n_in} n_out {n_out}");
                }
            }
        }
    }
}

#[test]
fn word_boundaries_against_dense() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for &(n_in, n_out) in &[(63, 1), (64, 64), (65, 63), (129, 70), (200, 128), (300, 3)] {
        let seed: BitString = (0..n_in + n_out - 1).map(|_| rng.gen::<bool>()).collect();
        let x: BitString = (0..n_in).map(|_| rng.gen::<bool>()).collect();
        let spec = ToeplitzSpec::new(n_in, n_out, seed.clone()).unwrap();
        assert_eq!(toeplitz_hash(&spec, &x).unwrap(), dense(&seed, n_in, n_out, &x));
    }
}
