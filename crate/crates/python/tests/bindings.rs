use kgrel::{insert_markers, score, tokenize, PyEmbeddingTable, PyKgeModel, PyKnowledgeGraph};

#[test]
fn functions_without_interpreter() {
    assert_eq!(tokenize("a b"), vec!["a", "b"]);
    assert_eq!(
        insert_markers("x y", (0, 1), (2, 3)).unwrap(),
        vec!["<<", "x", ">>", "[[", "y", "]]"]
    );
    let v: serde_json::Value =
        serde_json::from_str(&score(vec!["a".into()], vec!["a".into()]).unwrap()).unwrap();
    assert_eq!(v["macro_f1"], 1.0);
}

#[test]
fn classes_round_trip() {
    let kg = PyKnowledgeGraph::new(3, 2, vec![(0, 0, 1), (1, 1, 2)]).unwrap();
    assert_eq!(kg.__len__(), 2);
    assert_eq!(kg.relations_between(0, 1), vec![0]);
    let m = PyKgeModel::train(
        &kg, "distmult", 4, 3, 0.1, "adagrad", 1.0, 1e-3, 2, 2, "mixed", 0,
    )
    .unwrap();
    assert_eq!(m.epoch_losses().len(), 3);
    assert_eq!(
        m.relation_representation(Some(0), Some(1), None)
            .unwrap()
            .len(),
        4
    );
    assert!(
        PyKgeModel::train(&kg, "bogus", 4, 1, 0.1, "adagrad", 1.0, 0.0, 1, 1, "mixed", 0).is_err()
    );

    let mut t = PyEmbeddingTable::new(2);
    t.insert("d".into(), vec![1.0, 2.0]).unwrap();
    assert!(t.insert("e".into(), vec![1.0]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.ctxe");
    t.save(p.clone()).unwrap();
    assert_eq!(
        PyEmbeddingTable::load(p).unwrap().get("d"),
        Some(vec![1.0, 2.0])
    );
}
