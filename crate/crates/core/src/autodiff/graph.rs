use std::collections::{HashMap, HashSet};

use super::{OpKind, Scalar, Tensor};
use crate::error::{Error, Result};

/// Recorded ops reachable from a root, in topological order (inputs first).
pub struct Graph<T: Scalar> {
    nodes: Vec<Tensor<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn trace(root: &Tensor<T>) -> Self {
        let mut nodes = Vec::new();
        let mut visited = HashSet::new();
        let mut stack = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                nodes.push(t);
                continue;
            }
            let Some(node) = t.node() else { continue };
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for input in node.inputs.iter().rev() {
                if input.node().is_some() && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
        Graph { nodes }
    }

    pub(crate) fn nodes(&self) -> &[Tensor<T>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kinds(&self) -> Vec<OpKind> {
        self.nodes.iter().filter_map(|t| t.op_kind()).collect()
    }

    /// Reverse sweep. With `targets == None` every gradient-requiring leaf
    /// accumulates its gradient in place; otherwise only paths leading to the
    /// target leaves are visited and their gradients are returned.
    fn sweep(&self, root: &Tensor<T>, targets: Option<&HashSet<usize>>) -> HashMap<usize, Vec<T>> {
        let relevant: Option<HashSet<usize>> = targets.map(|targets| {
            let mut rel = HashSet::new();
            for t in &self.nodes {
                let node = t.node().expect("traced nodes are linked");
                if node
                    .inputs
                    .iter()
                    .any(|i| targets.contains(&i.id()) || rel.contains(&i.id()))
                {
                    rel.insert(t.id());
                }
            }
            rel
        });
        let wanted = |t: &Tensor<T>| match (&relevant, targets) {
            (Some(rel), Some(tg)) => rel.contains(&t.id()) || tg.contains(&t.id()),
            _ => t.requires_grad(),
        };

        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        let mut collected: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(root.id(), vec![T::one()]);

        for t in self.nodes.iter().rev() {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            let node = t.node().expect("traced nodes are linked");
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|i| i.requires_grad() && wanted(i))
                .collect();
            if !needs.iter().any(|&n| n) {
                continue;
            }
            let grads = node.op.backward(&g, &node.inputs, &needs);
            debug_assert_eq!(grads.len(), node.inputs.len());
            for ((input, gi), need) in node.inputs.iter().zip(grads).zip(needs) {
                if !need {
                    continue;
                }
                let gi = gi.unwrap_or_else(|| {
                    panic!("{} skipped a required input gradient", node.op.kind())
                });
                debug_assert_eq!(gi.len(), input.numel());
                if input.node().is_some() {
                    add_into(&mut pending, input.id(), gi);
                } else if targets.is_some() {
                    add_into(&mut collected, input.id(), gi);
                } else {
                    input.accumulate_grad(&gi);
                }
            }
        }
        collected
    }
}

fn add_into<T: Scalar>(map: &mut HashMap<usize, Vec<T>>, id: usize, g: Vec<T>) {
    match map.get_mut(&id) {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
        None => {
            map.insert(id, g);
        }
    }
}

fn check_root<T: Scalar>(loss: &Tensor<T>) -> Result<()> {
    if loss.numel() != 1 {
        return Err(Error::NonScalarLoss(loss.shape().to_vec()));
    }
    if loss.is_released() {
        return Err(Error::GraphReleased);
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    /// Accumulate `d self / d leaf` into every gradient-requiring leaf, then
    /// release the graph. Accumulators are additive; call
    /// [`Tensor::zero_grad`] between uses.
    pub fn backward(&self) -> Result<()> {
        check_root(self)?;
        if self.is_leaf() {
            if self.requires_grad() {
                self.accumulate_grad(&[T::one()]);
            }
            return Ok(());
        }
        let graph = Graph::trace(self);
        graph.sweep(self, None);
        for t in &graph.nodes {
            t.release();
        }
        Ok(())
    }
}

/// Gradients of a scalar `loss` with respect to the leaves `wrt`, in order.
/// Leaf accumulators are untouched and the graph stays usable.
pub fn grad<T: Scalar>(loss: &Tensor<T>, wrt: &[Tensor<T>]) -> Result<Vec<Vec<T>>> {
    check_root(loss)?;
    let targets: HashSet<usize> = wrt.iter().map(Tensor::id).collect();
    let mut found = if loss.is_leaf() {
        HashMap::from([(loss.id(), vec![T::one()])])
    } else {
        Graph::trace(loss).sweep(loss, Some(&targets))
    };
    Ok(wrt
        .iter()
        .map(|t| {
            found
                .remove(&t.id())
                .unwrap_or_else(|| vec![T::zero(); t.numel()])
        })
        .collect())
}
