from frag_lab.executor import ReplicateExecutor, derive_seed, replicate_rng


class TestSeeds:
    """Replicate seeds depend only on (master, tag, index)."""

    def test_deterministic(self):
        assert derive_seed(7, "oracle", 3) == derive_seed(7, "oracle", 3)

    def test_inputs_separate_streams(self):
        base = derive_seed(7, "oracle", 3)
        assert derive_seed(8, "oracle", 3) != base
        assert derive_seed(7, "probe", 3) != base
        assert derive_seed(7, "oracle", 4) != base

    def test_fits_in_64_bits(self):
        assert 0 <= derive_seed(2**70, "x", 0) < 2**64

    def test_rng_reproducible(self):
        assert replicate_rng(1, "t", 0).random() == replicate_rng(1, "t", 0).random()


class TestReplicateExecutor:
    def test_results_in_index_order(self):
        out = ReplicateExecutor(4).map(lambda i, rng: i, 1, "order", 20)
        assert out == list(range(20))

    def test_thread_count_does_not_change_output(self):
        def draw(i, rng):
            return float(rng.random())

        serial = ReplicateExecutor(1).map(draw, 99, "draws", 50)
        pooled = ReplicateExecutor(8).map(draw, 99, "draws", 50)
        assert serial == pooled

    def test_threads_clamped_to_one(self):
        assert ReplicateExecutor(0).threads == 1

    def test_logs_finished_batch(self, mocker):
        mock_event = mocker.patch("frag_lab.executor.log_experiment_event")
        ReplicateExecutor(1).map(lambda i, rng: i, 1, "logged", 3)
        mock_event.assert_called_once()
        assert mock_event.call_args[0][0] == "logged"
        assert mock_event.call_args[0][2]["count"] == 3
