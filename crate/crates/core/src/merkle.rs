//! RFC 6962 Merkle trees over 32-byte leaves.
//!
//! Leaf hashes are `SHA-256(0x00 || data)` and interior nodes are
//! `SHA-256(0x01 || left || right)`; trees of more than one leaf split at the
//! largest power of two strictly below the leaf count. Unpaired nodes are
//! promoted, never duplicated. The same construction backs both artifact
//! chunk digests and the transparency log, so proofs and roots from the two
//! interoperate.
//!
//! Proof generation walks the recursive definitions; verification uses the
//! iterative index-arithmetic algorithms, giving two independent routes
//! through the tree shape.

use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::hash::Hash32;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

/// Hash backend for tree operations. The default is SHA-256; tests inject a
/// counting wrapper to bound the number of evaluations a verification performs.
pub trait MerkleHasher {
    fn leaf(&mut self, data: &[u8]) -> Hash32;
    fn node(&mut self, left: &Hash32, right: &Hash32) -> Hash32;
}

/// Plain SHA-256 backend.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sha256Merkle;

impl MerkleHasher for Sha256Merkle {
    fn leaf(&mut self, data: &[u8]) -> Hash32 {
        let mut h = Sha256::new();
        h.update([LEAF_PREFIX]);
        h.update(data);
        Hash32(h.finalize().into())
    }

    fn node(&mut self, left: &Hash32, right: &Hash32) -> Hash32 {
        let mut h = Sha256::new();
        h.update([NODE_PREFIX]);
        h.update(left.0);
        h.update(right.0);
        Hash32(h.finalize().into())
    }
}

/// Wraps a backend and counts leaf/node evaluations.
#[derive(Debug, Default)]
pub struct CountingHasher<H> {
    pub inner: H,
    pub leaf_count: u64,
    pub node_count: u64,
}

impl<H: MerkleHasher> CountingHasher<H> {
    pub fn new(inner: H) -> Self {
        CountingHasher { inner, leaf_count: 0, node_count: 0 }
    }

    pub fn total(&self) -> u64 {
        self.leaf_count + self.node_count
    }
}

impl<H: MerkleHasher> MerkleHasher for CountingHasher<H> {
    fn leaf(&mut self, data: &[u8]) -> Hash32 {
        self.leaf_count += 1;
        self.inner.leaf(data)
    }

    fn node(&mut self, left: &Hash32, right: &Hash32) -> Hash32 {
        self.node_count += 1;
        self.inner.node(left, right)
    }
}

/// `SHA-256(0x00 || data)`.
pub fn leaf_hash(data: &[u8]) -> Hash32 {
    Sha256Merkle.leaf(data)
}

/// `SHA-256(0x01 || left || right)`.
pub fn node_hash(left: &Hash32, right: &Hash32) -> Hash32 {
    Sha256Merkle.node(left, right)
}

/// Largest power of two strictly less than `n`. Caller guarantees `n > 1`.
fn split_point(n: u64) -> u64 {
    debug_assert!(n > 1);
    1u64 << (63 - (n - 1).leading_zeros())
}

/// Root over already-hashed leaves; `None` for an empty slice.
pub fn root_from_leaves(leaves: &[Hash32]) -> Option<Hash32> {
    root_with(&mut Sha256Merkle, leaves)
}

pub fn root_with<H: MerkleHasher>(hasher: &mut H, leaves: &[Hash32]) -> Option<Hash32> {
    match leaves.len() {
        0 => None,
        1 => Some(leaves[0]),
        n => {
            let k = split_point(n as u64) as usize;
            let left = root_with(hasher, &leaves[..k]).expect("non-empty");
            let right = root_with(hasher, &leaves[k..]).expect("non-empty");
            Some(hasher.node(&left, &right))
        }
    }
}

/// Audit path for `leaves[index]` within the tree over all of `leaves`,
/// ordered from the leaf level upward. Empty for a single-leaf tree.
/// Caller guarantees `index < leaves.len()` and `leaves` non-empty.
pub fn audit_path(leaves: &[Hash32], index: u64) -> Vec<Hash32> {
    debug_assert!((index as usize) < leaves.len());
    let n = leaves.len() as u64;
    if n == 1 {
        return Vec::new();
    }
    let k = split_point(n);
    let mut path;
    if index < k {
        path = audit_path(&leaves[..k as usize], index);
        path.push(root_from_leaves(&leaves[k as usize..]).expect("non-empty"));
    } else {
        path = audit_path(&leaves[k as usize..], index - k);
        path.push(root_from_leaves(&leaves[..k as usize]).expect("non-empty"));
    }
    path
}

/// Expected audit-path length for `(index, tree_size)`.
pub fn audit_path_len(index: u64, tree_size: u64) -> usize {
    debug_assert!(index < tree_size);
    if tree_size == 1 {
        return 0;
    }
    let k = split_point(tree_size);
    1 + if index < k {
        audit_path_len(index, k)
    } else {
        audit_path_len(index - k, tree_size - k)
    }
}

/// Folds a leaf hash up an audit path, returning the implied root.
///
/// Returns `None` when the path shape does not match `(leaf_index,
/// tree_size)` — a structural defect, distinct from a fold that completes but
/// yields a different root. Performs exactly `siblings.len()` node hashes.
pub fn fold_audit_path<H: MerkleHasher>(
    hasher: &mut H,
    leaf: &Hash32,
    leaf_index: u64,
    tree_size: u64,
    siblings: &[Hash32],
) -> Option<Hash32> {
    if tree_size == 0 || leaf_index >= tree_size {
        return None;
    }
    let mut fnode = leaf_index;
    let mut snode = tree_size - 1;
    let mut acc = *leaf;
    for sibling in siblings {
        if snode == 0 {
            return None; // path longer than the tree is tall
        }
        if fnode & 1 == 1 || fnode == snode {
            acc = hasher.node(sibling, &acc);
            if fnode & 1 == 0 {
                while fnode & 1 == 0 && fnode != 0 {
                    fnode >>= 1;
                    snode >>= 1;
                }
            }
        } else {
            acc = hasher.node(&acc, sibling);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    if snode == 0 {
        Some(acc)
    } else {
        None // path shorter than the tree is tall
    }
}

/// Consistency proof showing the tree over `leaves[..old_size]` is a prefix
/// of the tree over all of `leaves`. Caller guarantees
/// `0 < old_size <= leaves.len()`. Empty when the sizes are equal.
pub fn consistency_path(leaves: &[Hash32], old_size: u64) -> Vec<Hash32> {
    debug_assert!(old_size > 0 && old_size as usize <= leaves.len());
    if old_size as usize == leaves.len() {
        return Vec::new();
    }
    subproof(leaves, old_size, true)
}

fn subproof(leaves: &[Hash32], m: u64, complete: bool) -> Vec<Hash32> {
    let n = leaves.len() as u64;
    if m == n {
        return if complete {
            Vec::new()
        } else {
            let mut v = Vec::with_capacity(1);
            v.push(root_from_leaves(leaves).expect("non-empty"));
            v
        };
    }
    let k = split_point(n);
    let mut path;
    if m <= k {
        path = subproof(&leaves[..k as usize], m, complete);
        path.push(root_from_leaves(&leaves[k as usize..]).expect("non-empty"));
    } else {
        path = subproof(&leaves[k as usize..], m - k, false);
        path.push(root_from_leaves(&leaves[..k as usize]).expect("non-empty"));
    }
    path
}

/// Verifies that `path` links `old_root` at `old_size` to `new_root` at
/// `new_size`. Total: malformed input yields `false`, never a panic.
pub fn verify_consistency_path<H: MerkleHasher>(
    hasher: &mut H,
    old_size: u64,
    new_size: u64,
    old_root: &Hash32,
    new_root: &Hash32,
    path: &[Hash32],
) -> bool {
    if old_size == 0 || old_size > new_size {
        return false;
    }
    if old_size == new_size {
        return path.is_empty() && old_root == new_root;
    }

    // When the old tree is a complete subtree its root is a node of the new
    // tree and is implied rather than carried in the proof.
    let mut full_path: Vec<&Hash32> = Vec::with_capacity(path.len() + 1);
    if old_size.is_power_of_two() {
        full_path.push(old_root);
    }
    full_path.extend(path.iter());

    let mut fnode = old_size - 1;
    let mut snode = new_size - 1;
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let mut iter = full_path.iter();
    let seed = match iter.next() {
        Some(h) => **h,
        None => return false,
    };
    let mut fr = seed;
    let mut sr = seed;
    for &c in iter {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            fr = hasher.node(c, &fr);
            sr = hasher.node(c, &sr);
            if fnode & 1 == 0 {
                while fnode & 1 == 0 && fnode != 0 {
                    fnode >>= 1;
                    snode >>= 1;
                }
            }
        } else {
            sr = hasher.node(&sr, c);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && fr == *old_root && sr == *new_root
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // Shared transparency-log test vectors (the widely used RFC 6962 suite):
    // eight fixed leaves and the roots of the trees over each prefix.
    pub(crate) const VECTOR_LEAVES: [&[u8]; 8] = [
        b"",
        &[0x00],
        &[0x10],
        &[0x20, 0x21],
        &[0x30, 0x31],
        &[0x40, 0x41, 0x42, 0x43],
        &[0x50, 0x51, 0x52, 0x53, 0x54, 0x55, 0x56, 0x57],
        &[
            0x60, 0x61, 0x62, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x6b, 0x6c, 0x6d,
            0x6e, 0x6f,
        ],
    ];

    pub(crate) const VECTOR_ROOTS: [&str; 8] = [
        "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d",
        "fac54203e7cc696cf0dfcb42c92a1d9dbaf70ad9e621f4bd8d98662f00e3c125",
        "aeb6bcfe274b70a14fb067a5e5578264db0fa9b51af5e0ba159158f329e06e77",
        "d37ee418976dd95753c1c73862b9398fa2a2cf9b4ff0fdfe8b30cd95209614b7",
        "4e3bbb1f7b478dcfe71fb631631519a3bca12c9aefca1612bfce4c13a86264d4",
        "76e67dadbcdf1e10e1b74ddc608abd2f98dfb16fbce75277b5232a127f2087ef",
        "ddb89be403809e325750d3d263cd78929c2942b7942a34b77e122c9594a74c8c",
        "5dc9da79a70659a9ad559cb701ded9a2ab9d823aad2f4960cfe370eff4604328",
    ];

    fn vector_leaf_hashes(n: usize) -> Vec<Hash32> {
        VECTOR_LEAVES[..n].iter().map(|d| leaf_hash(d)).collect()
    }

    fn root_of(n: usize) -> Hash32 {
        Hash32::from_hex(VECTOR_ROOTS[n - 1]).unwrap()
    }

    #[test]
    fn roots_match_shared_vectors() {
        for n in 1..=8 {
            let leaves = vector_leaf_hashes(n);
            assert_eq!(root_from_leaves(&leaves).unwrap(), root_of(n), "tree size {n}");
        }
    }

    #[test]
    fn empty_tree_has_no_root() {
        assert_eq!(root_from_leaves(&[]), None);
    }

    #[test]
    fn leaf_and_node_domains_are_separated() {
        let l0 = leaf_hash(b"a");
        let l1 = leaf_hash(b"b");
        let interior = node_hash(&l0, &l1);
        // A leaf whose content is the interior preimage body must not collide.
        let mut preimage = Vec::new();
        preimage.extend_from_slice(&l0.0);
        preimage.extend_from_slice(&l1.0);
        assert_ne!(leaf_hash(&preimage), interior);
    }

    #[test]
    fn audit_paths_fold_to_vector_roots() {
        for n in 1..=8usize {
            let leaves = vector_leaf_hashes(n);
            for i in 0..n as u64 {
                let path = audit_path(&leaves, i);
                assert_eq!(path.len(), audit_path_len(i, n as u64), "len for ({i},{n})");
                let folded =
                    fold_audit_path(&mut Sha256Merkle, &leaves[i as usize], i, n as u64, &path)
                        .unwrap();
                assert_eq!(folded, root_of(n), "leaf {i} of {n}");
            }
        }
    }

    #[test]
    fn fold_rejects_malformed_path_lengths() {
        let leaves = vector_leaf_hashes(5);
        let path = audit_path(&leaves, 2);
        assert_eq!(path.len(), 3);
        let mut short = path.clone();
        short.pop();
        assert_eq!(fold_audit_path(&mut Sha256Merkle, &leaves[2], 2, 5, &short), None);
        let mut long = path.clone();
        long.push(Hash32::ZERO);
        assert_eq!(fold_audit_path(&mut Sha256Merkle, &leaves[2], 2, 5, &long), None);
        assert_eq!(fold_audit_path(&mut Sha256Merkle, &leaves[2], 5, 5, &path), None);
        assert_eq!(fold_audit_path(&mut Sha256Merkle, &leaves[2], 2, 0, &path), None);
    }

    #[test]
    fn consistency_honest_growth_verifies() {
        for new in 1..=8usize {
            let leaves = vector_leaf_hashes(new);
            for old in 1..=new {
                let path = consistency_path(&leaves, old as u64);
                let ok = verify_consistency_path(
                    &mut Sha256Merkle,
                    old as u64,
                    new as u64,
                    &root_of(old),
                    &root_of(new),
                    &path,
                );
                assert!(ok, "consistency {old} -> {new}");
            }
        }
    }

    #[test]
    fn consistency_known_shapes() {
        let leaves = vector_leaf_hashes(2);
        // Growing 1 -> 2: the proof is exactly the second leaf hash.
        assert_eq!(consistency_path(&leaves, 1), vec![leaves[1]]);
        // Equal sizes: degenerate empty proof.
        assert!(verify_consistency_path(&mut Sha256Merkle, 2, 2, &root_of(2), &root_of(2), &[]));
        assert!(!verify_consistency_path(&mut Sha256Merkle, 2, 2, &root_of(2), &root_of(1), &[]));
    }

    #[test]
    fn consistency_rejects_forks_and_garbage() {
        let leaves = vector_leaf_hashes(8);
        let path = consistency_path(&leaves, 3);
        // Honest baseline.
        assert!(verify_consistency_path(
            &mut Sha256Merkle, 3, 8, &root_of(3), &root_of(8), &path
        ));
        // Wrong old root.
        assert!(!verify_consistency_path(
            &mut Sha256Merkle, 3, 8, &root_of(2), &root_of(8), &path
        ));
        // Tampered proof element.
        let mut bad = path.clone();
        bad[0].0[0] ^= 1;
        assert!(!verify_consistency_path(
            &mut Sha256Merkle, 3, 8, &root_of(3), &root_of(8), &bad
        ));
        // Shrinking tree and zero old size.
        assert!(!verify_consistency_path(
            &mut Sha256Merkle, 8, 3, &root_of(8), &root_of(3), &path
        ));
        assert!(!verify_consistency_path(
            &mut Sha256Merkle, 0, 8, &root_of(1), &root_of(8), &path
        ));
        // Truncated proof.
        assert!(!verify_consistency_path(
            &mut Sha256Merkle, 3, 8, &root_of(3), &root_of(8), &path[..1]
        ));
    }

    #[test]
    fn counting_hasher_counts_fold_cost() {
        let leaves = vector_leaf_hashes(8);
        let path = audit_path(&leaves, 5);
        let mut counter = CountingHasher::new(Sha256Merkle);
        let folded = fold_audit_path(&mut counter, &leaves[5], 5, 8, &path).unwrap();
        assert_eq!(folded, root_of(8));
        assert_eq!(counter.node_count, path.len() as u64);
        assert_eq!(counter.leaf_count, 0);
    }
}
