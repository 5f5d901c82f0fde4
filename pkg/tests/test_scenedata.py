import json
import math

import numpy as np
import pytest

from nmprel import scenedata as SD
from nmprel.geometry import BoundingBox
from nmprel.scenedata import ObjectInstance, RelationAnnotation, Scene
from oracles import distance_oracle, iou_oracle


def _obj(cat, x=0.0, feat=None):
    return ObjectInstance(BoundingBox(x, 0.0, 10.0, 10.0), cat, feat)


def _scene(sid, cats, rels):
    return Scene(sid, 100.0, 100.0, tuple(_obj(c, 20.0 * i) for i, c in enumerate(cats)),
                 tuple(RelationAnnotation(*r) for r in rels))


def _doc(scenes):
    return {"scenes": scenes}


def _raw_scene(**overrides):
    raw = {"id": "s0", "image_w": 100, "image_h": 80,
           "objects": [{"x": 1, "y": 2, "w": 3, "h": 4, "category": 0},
                       {"x": 10, "y": 20, "w": 30, "h": 40, "category": 1}],
           "relations": [{"sub": 0, "obj": 1, "pred": 2}]}
    raw.update(overrides)
    return raw


class TestLoad:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text('{"scenes": []}')
        assert SD.load_scenes(p) == []

    def test_parses_schema(self):
        scenes, meta = SD.scenes_from_document(_doc([_raw_scene()]))
        (s,) = scenes
        assert s.objects[1].box == BoundingBox(10, 20, 30, 40)
        assert s.relations == (RelationAnnotation(0, 1, 2),)
        assert meta.num_categories == 2 and meta.num_predicates == 3

    def test_relation_out_of_range_names_scene(self):
        with pytest.raises(SD.SceneValidationError) as err:
            SD.scenes_from_document(_doc([_raw_scene(id="kitchen", relations=[{"sub": 0, "obj": 5, "pred": 0}])]))
        assert "kitchen" in str(err.value)
        assert any("relations[0]" in v for v in err.value.violations)

    def test_reports_every_violation(self):
        bad = _raw_scene(objects=[{"x": 0, "y": 0, "w": -1, "h": 4, "category": 0},
                                  {"x": 0, "y": 0, "w": 1, "h": 4, "category": -2}],
                         relations=[{"sub": 0, "obj": 0, "pred": 1}])
        with pytest.raises(SD.SceneValidationError) as err:
            SD.scenes_from_document(_doc([bad, _raw_scene(id="s1", image_w=0)]))
        text = "\n".join(err.value.violations)
        assert "objects[0]" in text and "objects[1]" in text and "relations[0]" in text and "'s1'" in text

    def test_inconsistent_visual_dim(self):
        raw = _raw_scene()
        raw["objects"][0]["visual_feature"] = [0.0, 1.0]
        raw["objects"][1]["visual_feature"] = [0.0, 1.0, 2.0]
        with pytest.raises(SD.SceneValidationError):
            SD.scenes_from_document(_doc([raw]))

    def test_category_beyond_meta(self):
        doc = {"meta": {"num_categories": 1}, "scenes": [_raw_scene()]}
        with pytest.raises(SD.SceneValidationError):
            SD.scenes_from_document(doc)

    def test_parse_error(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text("{not json")
        with pytest.raises(ValueError):
            SD.load_scenes(p)

    def test_round_trip_exact(self, tmp_path):
        scenes = SD.generate_synthetic(SD.SyntheticConfig(num_scenes=5, seed=3))
        scenes[0] = Scene(scenes[0].id, 640.5, 480.25,
                          (ObjectInstance(BoundingBox(1 / 3, 2 / 7, 1e-3, 123.456789012345), 0, (0.1, -1e-300) + (1 / 3,) * 14,
                                          0.875),) + scenes[0].objects[1:], scenes[0].relations)
        p = tmp_path / "s.json"
        SD.save_scenes(scenes, p)
        assert SD.load_scenes(p) == scenes


class TestEmbedding:
    def test_concatenation_order(self):
        words = SD.EmbeddingTable(np.arange(6.0).reshape(2, 3))
        obj = ObjectInstance(BoundingBox(0, 0, 1, 1), 1, (9.0, 8.0, 7.0, 6.0))
        v = SD.resolve_object_embedding(obj, words)
        assert v.shape == (7,)
        np.testing.assert_array_equal(v[:4], obj.visual_feature)
        np.testing.assert_array_equal(v[4:], [3.0, 4.0, 5.0])

    def test_word_only(self):
        words = SD.EmbeddingTable.glorot(4, 5, np.random.default_rng(0))
        obj = ObjectInstance(BoundingBox(0, 0, 1, 1), 2)
        np.testing.assert_array_equal(SD.resolve_object_embedding(obj, words, use_visual=False), words.rows[2])

    def test_same_category_same_row(self):
        words = SD.EmbeddingTable.glorot(4, 5, np.random.default_rng(0))
        a = ObjectInstance(BoundingBox(0, 0, 1, 1), 3, (1.0,))
        b = ObjectInstance(BoundingBox(5, 5, 2, 2), 3, (2.0,))
        np.testing.assert_array_equal(SD.resolve_object_embedding(a, words)[1:], SD.resolve_object_embedding(b, words)[1:])

    def test_missing_visual(self):
        with pytest.raises(ValueError):
            SD.resolve_object_embedding(ObjectInstance(BoundingBox(0, 0, 1, 1), 0), None, use_word=False)

    def test_file_round_trip(self, tmp_path):
        words = SD.EmbeddingTable.glorot(3, 4, np.random.default_rng(1))
        SD.save_embedding_table(words, tmp_path / "w.json")
        back = SD.load_embedding_table(tmp_path / "w.json")
        np.testing.assert_array_equal(back.rows, words.rows)
        (tmp_path / "bad.json").write_text(json.dumps({"dim": 2, "rows": [[1, 2], [3]]}))
        with pytest.raises(ValueError):
            SD.load_embedding_table(tmp_path / "bad.json")


class TestZeroShot:
    def test_identical_content(self):
        train = [_scene("a", [0, 1, 2], [(0, 1, 0), (2, 1, 3)])]
        seen, unseen = SD.zero_shot_split(train, train)
        assert unseen == set() and seen == {(0, 0), (0, 1)}

    def test_no_train_relations(self):
        test = [_scene("a", [0, 1], [(0, 1, 0), (1, 0, 1)])]
        seen, unseen = SD.zero_shot_split([_scene("t", [0, 1], [])], test)
        assert seen == set() and unseen == {(0, 0), (0, 1)}

    def test_hand_built_split(self):
        # triplet types (0,p0,1), (1,p1,2), (1,p0,0) are in train; (2,p2,0) is held out
        train = [_scene("t0", [0, 1, 2], [(0, 1, 0), (1, 2, 1)]), _scene("t1", [1, 0], [(0, 1, 0)])]
        test = [_scene("x0", [2, 0, 1], [(0, 1, 2), (1, 2, 0), (2, 0, 1)]),
                _scene("x1", [2, 1, 0], [(0, 2, 2), (2, 1, 0), (1, 2, 0)])]
        seen, unseen = SD.zero_shot_split(train, test)
        assert unseen == {(0, 0), (1, 0)}
        all_rel = {(s, r) for s in range(2) for r in range(3)}
        assert seen | unseen == all_rel and not seen & unseen

    def test_partition_property(self):
        scenes = SD.generate_synthetic(SD.SyntheticConfig(num_scenes=40, seed=5))
        seen, unseen = SD.zero_shot_split(scenes[:10], scenes[10:])
        total = {(s, r) for s, sc in enumerate(scenes[10:]) for r in range(len(sc.relations))}
        assert seen | unseen == total and not seen & unseen
        known = SD.triplet_types(scenes[:10])
        assert all(scenes[10 + s].triplet_type(scenes[10 + s].relations[r]) not in known for s, r in unseen)


class TestSynthetic:
    def test_deterministic(self):
        cfg = SD.SyntheticConfig(num_scenes=20, seed=11)
        assert SD.dumps_scenes(SD.generate_synthetic(cfg)) == SD.dumps_scenes(SD.generate_synthetic(cfg))
        other = SD.generate_synthetic(SD.SyntheticConfig(num_scenes=20, seed=12))
        assert SD.dumps_scenes(other) != SD.dumps_scenes(SD.generate_synthetic(cfg))

    @pytest.mark.parametrize("field,value", [("num_scenes", 0), ("objects_per_scene", 1), ("num_predicates", 3),
                                             ("visual_dim", 2), ("noise", -1.0)])
    def test_config_validation(self, field, value):
        with pytest.raises(ValueError):
            SD.generate_synthetic(SD.SyntheticConfig(**{field: value}))

    def test_rules_rechecked_independently(self):
        cfg = SD.SyntheticConfig(num_scenes=100, seed=2)
        scenes = SD.generate_synthetic(cfg)
        table = SD.semantic_table(cfg)
        counts = np.zeros(cfg.num_predicates, dtype=int)
        for s in scenes:
            assert len(s.relations) <= cfg.objects_per_scene * (cfg.objects_per_scene - 1)
            for o in s.objects:
                b = o.box
                assert 0 <= b.x and 0 <= b.y and b.x2 <= 1000 and b.y2 <= 1000
                assert len(o.visual_feature) == cfg.visual_dim
                assert int(np.argmax(o.visual_feature)) == o.category
            for r in s.relations:
                assert r.subject_idx != r.object_idx
                a = s.objects[r.subject_idx].box.as_tuple()
                b = s.objects[r.object_idx].box.as_tuple()
                overlap = iou_oracle(a, b)
                gap = ((b[1] + b[3] / 2) - (a[1] + a[3] / 2)) / math.hypot(1000, 1000)
                dis = distance_oracle(a, b, 1000, 1000)
                counts[r.predicate] += 1
                if r.predicate == 3:
                    assert overlap > 0.3
                elif r.predicate == 0:
                    assert overlap < 0.3 and gap > 0.05
                elif r.predicate == 1:
                    assert overlap < 0.3 and gap < -0.05
                elif r.predicate == 2:
                    assert overlap < 0.3 and abs(gap) <= 0.05 and dis < 0.2
                else:
                    assert overlap < 0.3 and abs(gap) <= 0.05 and dis >= 0.2
                    assert table[(s.objects[r.subject_idx].category, s.objects[r.object_idx].category)] == r.predicate
        assert np.all(counts > 0)

    def test_semantic_table_one_orientation(self):
        table = SD.semantic_table(SD.SyntheticConfig(num_categories=7))
        assert len(table) == 21
        assert all((b, a) not in table for a, b in table)
        assert all(4 <= p < 8 for p in table.values())

    def test_layout_marker(self):
        scenes = SD.generate_synthetic(SD.SyntheticConfig(num_scenes=60, seed=4))
        with_marker = sum(any(o.category == 0 for o in s.objects) for s in scenes)
        assert 0 < with_marker < 60
        flat = SD.generate_synthetic(SD.SyntheticConfig(num_scenes=60, seed=4, context_layouts=False))
        assert SD.dumps_scenes(flat) != SD.dumps_scenes(scenes)
