use std::collections::BTreeSet;

use costa_core::registry::{MdtRow, ResourceType};
use costa_core::toolgraph::{build_tdg, build_tool_subgraph, enumerate_paths};
use costa_core::{parse_subtask_tree, ModelDescriptionTable, SubtaskKind, SubtaskTree};
use proptest::prelude::*;

const KINDS: [SubtaskKind; 3] = [
    SubtaskKind::ObjectDetection,
    SubtaskKind::ObjectSegmentation,
    SubtaskKind::ObjectRemoval,
];

fn resource(i: usize) -> String {
    if i == 0 {
        "Input Image".into()
    } else {
        format!("R{i}")
    }
}

prop_compose! {
    fn tool_row(n_res: usize, idx: usize)(
        kind in 0..KINDS.len(),
        inputs in prop::collection::btree_set(0..=n_res, 1..=2),
        outputs in prop::collection::btree_set(1..=n_res, 1..=2),
    ) -> MdtRow {
        MdtRow {
            tool: format!("T{idx}"),
            subtasks: vec![KINDS[kind].name().to_string()],
            inputs: inputs.into_iter().map(resource).collect(),
            outputs: outputs.into_iter().map(resource).collect(),
        }
    }
}

fn mdt_strategy() -> impl Strategy<Value = Vec<MdtRow>> {
    (1usize..5, 1usize..8)
        .prop_flat_map(|(n_res, n_tools)| (0..n_tools).map(|i| tool_row(n_res, i)).collect::<Vec<_>>())
}

fn tree_strategy() -> impl Strategy<Value = SubtaskTree> {
    (1usize..5)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0..KINDS.len(), n),
                prop::collection::vec(prop::collection::vec(any::<bool>(), n), n),
            )
        })
        .prop_map(|(kinds, parent_bits)| {
            let labels: Vec<String> = kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| format!("{}({})", KINDS[k].name(), i + 1))
                .collect();
            let nodes: Vec<serde_json::Value> = (0..labels.len())
                .map(|i| {
                    let parents: Vec<&String> = (0..i).filter(|&p| parent_bits[i][p]).map(|p| &labels[p]).collect();
                    serde_json::json!({"subtask": labels[i], "parent": parents})
                })
                .collect();
            let doc = serde_json::json!({"task": "random", "subtask_tree": nodes});
            parse_subtask_tree(&doc.to_string(), &SubtaskKind::PLANNER).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn expansion_invariants(rows in mdt_strategy(), tree in tree_strategy()) {
        let mdt = ModelDescriptionTable::from_rows(&rows).unwrap();
        let tdg = build_tdg(&mdt);
        let g = match build_tool_subgraph(&tree, &mdt, &tdg) {
            Ok(g) => g,
            Err(_) => return Ok(()),
        };

        for (a, b) in g.edges() {
            prop_assert!(a < b, "edge {a}->{b} goes backwards");
        }

        let chains: BTreeSet<Vec<usize>> = tree.chains().into_iter().collect();
        let instance_index = |v: usize| {
            let inst = &g.node(v).step().unwrap().instance;
            tree.nodes().iter().position(|n| n == inst).unwrap()
        };
        for path in enumerate_paths(&g, 100_000).unwrap() {
            // Every tool finds all of its inputs upstream on this very path.
            let mut have: BTreeSet<ResourceType> = BTreeSet::from([ResourceType::input_image()]);
            for &v in &path[1..] {
                let step = g.node(v).step().unwrap();
                let rec = mdt.record(&step.tool, step.subtask).unwrap();
                prop_assert!(rec.inputs.is_subset(&have), "node {v} starved on {path:?}");
                have.extend(rec.outputs.iter().cloned());
            }
            // The instances visited, in order, spell out a tree chain.
            let mut visited: Vec<usize> = Vec::new();
            for &v in &path[1..] {
                let i = instance_index(v);
                if visited.last() != Some(&i) {
                    visited.push(i);
                }
            }
            prop_assert!(chains.contains(&visited), "{visited:?} is not a tree chain");
            // The path ends on a tool performing the final instance itself.
            let last = g.node(*path.last().unwrap()).step().unwrap();
            prop_assert_eq!(last.subtask, last.instance.kind);
        }
    }
}
