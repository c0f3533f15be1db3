//! Huffman coding over vocabulary frequencies, backing the hierarchical
//! softmax. Construction is deterministic: the priority queue breaks
//! frequency ties by node id, so equal inputs always yield equal trees.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::{Error, Result};

/// Binary prefix code for a vocabulary of V words.
///
/// The tree has V - 1 inner nodes. `codes[w]` holds the bit taken at each
/// inner node on the root-to-leaf walk for word w, and `paths[w]` the
/// matching inner node indices (0-based rows into the output matrix), so
/// `codes[w].len() == paths[w].len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    pub codes: Vec<Vec<bool>>,
    pub paths: Vec<Vec<u32>>,
}

impl HuffmanTree {
    pub fn vocab_size(&self) -> usize {
        self.codes.len()
    }

    pub fn inner_count(&self) -> usize {
        self.codes.len() - 1
    }

    pub fn code_len(&self, word: u32) -> usize {
        self.codes[word as usize].len()
    }
}

/// Build the Huffman tree for the given leaf frequencies.
pub fn build_huffman(frequencies: &[u64]) -> Result<HuffmanTree> {
    let v = frequencies.len();
    if v < 2 {
        return Err(Error::VocabTooSmall(v));
    }

    // Leaves are 0..V, inner nodes V..2V-1, created in merge order.
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = frequencies
        .iter()
        .enumerate()
        .map(|(id, &f)| Reverse((f, id as u32)))
        .collect();

    let mut parent = vec![0u32; 2 * v - 1];
    let mut bit = vec![false; 2 * v - 1];
    let mut next_id = v as u32;
    while heap.len() > 1 {
        let Reverse((f0, n0)) = heap.pop().unwrap();
        let Reverse((f1, n1)) = heap.pop().unwrap();
        parent[n0 as usize] = next_id;
        parent[n1 as usize] = next_id;
        bit[n0 as usize] = false;
        bit[n1 as usize] = true;
        heap.push(Reverse((f0 + f1, next_id)));
        next_id += 1;
    }
    let root = next_id - 1;

    let mut codes = Vec::with_capacity(v);
    let mut paths = Vec::with_capacity(v);
    for leaf in 0..v as u32 {
        let mut code = Vec::new();
        let mut path = Vec::new();
        let mut node = leaf;
        while node != root {
            code.push(bit[node as usize]);
            path.push(parent[node as usize] - v as u32);
            node = parent[node as usize];
        }
        code.reverse();
        path.reverse();
        codes.push(code);
        paths.push(path);
    }

    Ok(HuffmanTree { codes, paths })
}
