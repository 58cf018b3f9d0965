import numpy as np
import pytest

from ..errors import ContractError, DegenerateMaskError, ShapeError, TransferError
from ..nets import encode_content
from ..transfer import (
    TransferJob,
    TransferRequest,
    align_content,
    align_pixels,
    composite,
    run_transfer,
    transfer_object,
)
from .conftest import random_images, square_mask


@pytest.fixture
def scene():
    images = random_images(2, 8, seed=31)
    return images[0], images[1]


def code(values):
    return np.array(values, dtype=np.float64).reshape(1, 1, 1, -1)


class TestAlignContent:
    def test_hand_example(self):
        aligned = align_content(code([0.0, 2.0]), code([7.0, 13.0]), t=1.0)
        np.testing.assert_allclose(aligned.reshape(-1), [7.0, 13.0])

    def test_reference_statistics_are_reached(self):
        gen = np.random.default_rng(0)
        c_in, c_ref = gen.normal(size=(1, 4, 3, 3)), gen.normal(2.0, 3.0, size=(1, 4, 3, 3))
        aligned = align_content(c_in, c_ref, 1.0)
        np.testing.assert_allclose(aligned.mean(axis=(2, 3)), c_ref.mean(axis=(2, 3)), atol=1e-9)
        np.testing.assert_allclose(aligned.std(axis=(2, 3)), c_ref.std(axis=(2, 3)), atol=1e-9)

    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
    def test_align_to_itself(self, t):
        c = np.random.default_rng(1).normal(size=(1, 3, 4, 4)).astype(np.float32)
        np.testing.assert_allclose(align_content(c, c, t), c, atol=1e-5)

    def test_zero_strength_keeps_input(self):
        gen = np.random.default_rng(2)
        c_in = gen.normal(size=(1, 3, 4, 4)).astype(np.float32)
        aligned = align_content(c_in, gen.normal(5.0, 2.0, size=(1, 3, 4, 4)).astype(np.float32), 0.0)
        np.testing.assert_allclose(aligned, c_in, atol=1e-5)
        assert aligned.dtype == np.float32

    def test_halfway(self):
        aligned = align_content(code([0.0, 2.0]), code([7.0, 13.0]), t=0.5)
        # mean 1 -> 5.5, std 1 -> 2
        np.testing.assert_allclose(aligned.reshape(-1), [3.5, 7.5])

    def test_constant_channel_takes_target_mean(self):
        aligned = align_content(code([4.0, 4.0]), code([1.0, 3.0]), t=1.0)
        np.testing.assert_allclose(aligned.reshape(-1), [2.0, 2.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            align_content(code([0.0, 1.0]), code([0.0, 1.0, 2.0]))

    def test_cells_restrict_the_statistics(self):
        c_in = np.array([[[[1.0, 3.0], [50.0, -50.0]]]])
        c_ref = np.array([[[[9.0, 9.0], [10.0, 14.0]]]])
        top, bottom = np.array([[1.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 1.0]])
        aligned = align_content(c_in, c_ref, 1.0, in_cells=top, ref_cells=bottom)
        # top row: mean 2, std 1 -> mean 12, std 2
        np.testing.assert_allclose(aligned[0, 0, 0], [10.0, 14.0])
        np.testing.assert_allclose(aligned[0, 0, 1], [12.0 + 2.0 * 48.0, 12.0 - 2.0 * 52.0])

    def test_empty_cells(self):
        with pytest.raises(ShapeError):
            align_content(code([0.0, 1.0]), code([0.0, 1.0]), in_cells=np.zeros((1, 2)))

    @pytest.mark.parametrize("t", [-0.1, 1.5])
    def test_t_range(self, t):
        with pytest.raises(ContractError):
            align_content(code([0.0, 1.0]), code([0.0, 1.0]), t)


class TestAlignPixels:
    def test_masked_statistics_move_to_reference(self):
        gen = np.random.default_rng(3)
        image = gen.uniform(-0.3, 0.3, size=(8, 8, 3)).astype(np.float32)
        reference = gen.uniform(-0.4, 0.2, size=(8, 8, 3)).astype(np.float32)
        mask, ref_mask = square_mask(8, 0, 0, 4), square_mask(8, 4, 4, 4)
        out = align_pixels(image, mask, reference, ref_mask, 1.0)

        inside, ref_inside = out[mask > 0], reference[ref_mask > 0]
        np.testing.assert_allclose(inside.mean(axis=0), ref_inside.mean(axis=0), atol=1e-5)
        np.testing.assert_allclose(inside.std(axis=0), ref_inside.std(axis=0), atol=1e-5)
        np.testing.assert_array_equal(out[mask == 0], image[mask == 0])

    def test_zero_strength_keeps_image(self):
        image = random_images(1, 8, seed=4)[0]
        out = align_pixels(image, square_mask(8, 1, 1, 5), random_images(1, 8, seed=5)[0], np.ones((8, 8)), 0.0)
        np.testing.assert_allclose(out, image, atol=1e-6)


class TestComposite:
    def test_no_layers(self, scene):
        image, _ = scene
        np.testing.assert_array_equal(composite(image, []), image)

    def test_full_mask_layer(self, scene):
        image, layer = scene
        np.testing.assert_array_equal(composite(image, [(np.ones((8, 8)), layer)]), layer)

    def test_later_layers_win_overlaps(self, scene):
        image, _ = scene
        first, second = np.full_like(image, 0.5), np.full_like(image, -0.5)
        mask_a, mask_b = square_mask(8, 0, 0, 5), square_mask(8, 3, 3, 5)
        out = composite(image, [(mask_a, first), (mask_b, second)])
        assert np.all(out[3:5, 3:5] == -0.5)
        assert np.all(out[0:3, 0:3] == 0.5)
        assert np.all(out[5:, 5:] == -0.5)
        untouched = (mask_a == 0) & (mask_b == 0)
        np.testing.assert_array_equal(out[untouched], image[untouched])

    def test_layer_shape_mismatch(self, scene):
        image, _ = scene
        with pytest.raises(ShapeError):
            composite(image, [(np.ones((8, 8)), np.zeros((4, 4, 3)))])


class TestTransferObject:
    def test_zero_strength_returns_input_bitwise(self, mini_params, scene):
        image, reference = scene
        out = transfer_object(image, square_mask(8, 2, 2, 4), reference, np.ones((8, 8)), mini_params, strength=0.0)
        np.testing.assert_array_equal(out, image)
        assert out is not image

    def test_output_shape_and_range(self, mini_params, scene):
        image, reference = scene
        out = transfer_object(image, square_mask(8, 2, 2, 4), reference, square_mask(8, 0, 0, 4), mini_params)
        assert out.shape == (8, 8, 3)
        assert out.dtype == np.float32
        assert np.all(np.abs(out) <= 1.0)

    def test_blend_moves_monotonically_with_strength(self, mini_params, scene):
        image, reference = scene
        mask = square_mask(8, 2, 2, 4)
        distances = [
            np.abs(transfer_object(image, mask, reference, np.ones((8, 8)), mini_params, strength=s) - image).mean()
            for s in (0.0, 0.25, 0.5, 1.0)
        ]
        assert distances[0] == 0.0
        assert distances == sorted(distances)
        assert distances[1] < distances[3]

    @pytest.mark.parametrize("alignment", ["content", "pixel", "none"])
    def test_alignment_variants(self, mini_params, scene, alignment):
        image, reference = scene
        out = transfer_object(
            image, square_mask(8, 2, 2, 4), reference, square_mask(8, 4, 4, 4), mini_params, alignment=alignment
        )
        assert out.shape == image.shape

    def test_unknown_alignment(self, mini_params, scene):
        image, reference = scene
        with pytest.raises(ContractError):
            transfer_object(image, np.ones((8, 8)), reference, np.ones((8, 8)), mini_params, alignment="hue")

    def test_empty_input_mask(self, mini_params, scene):
        image, reference = scene
        with pytest.raises(DegenerateMaskError):
            transfer_object(image, np.zeros((8, 8)), reference, np.ones((8, 8)), mini_params)

    def test_strength_range(self, mini_params, scene):
        image, reference = scene
        with pytest.raises(ContractError):
            transfer_object(image, np.ones((8, 8)), reference, np.ones((8, 8)), mini_params, strength=1.2)


class TestRunTransfer:
    def job(self, reference, mask, **kwargs):
        return TransferJob(mask=mask, reference=reference, reference_mask=np.ones((8, 8)), **kwargs)

    def test_no_jobs(self, mini_params, scene):
        image, _ = scene
        result = run_transfer(TransferRequest(image), mini_params)
        np.testing.assert_array_equal(result.image, image)
        assert result.diagnostics == ()

    def test_all_strengths_zero(self, mini_params, scene):
        image, reference = scene
        jobs = (
            self.job(reference, square_mask(8, 0, 0, 4), strength=0.0),
            self.job(reference, square_mask(8, 4, 4, 4), strength=0.0),
        )
        result = run_transfer(TransferRequest(image, jobs), mini_params)
        np.testing.assert_array_equal(result.image, image)
        assert len(result.diagnostics) == 2

    def test_single_job_only_touches_its_object(self, mini_params, scene):
        image, reference = scene
        mask = square_mask(8, 2, 2, 4)
        result = run_transfer(TransferRequest(image, (self.job(reference, mask),)), mini_params)
        expected = transfer_object(image, mask, reference, np.ones((8, 8)), mini_params)
        np.testing.assert_array_equal(result.image[mask > 0], expected[mask > 0])
        np.testing.assert_array_equal(result.image[mask == 0], image[mask == 0])

    def test_diagnostics_report_reference_statistics(self, mini_params, scene):
        image, reference = scene
        result = run_transfer(TransferRequest(image, (self.job(reference, np.ones((8, 8))),)), mini_params)
        c_ref = encode_content(reference, mini_params).data[0].astype(np.float64)
        diagnostics = result.diagnostics[0]
        np.testing.assert_allclose(diagnostics.aligned_mean, c_ref.mean(axis=(1, 2)), atol=1e-5)
        np.testing.assert_allclose(diagnostics.aligned_std, c_ref.std(axis=(1, 2)), atol=1e-5)
        assert 0.0 <= diagnostics.output_hue < 360.0

    def test_threads_give_the_same_result(self, mini_params, scene):
        image, reference = scene
        jobs = (
            self.job(reference, square_mask(8, 0, 0, 5)),
            self.job(image, square_mask(8, 3, 3, 5), strength=0.5, align_t=0.5),
        )
        request = TransferRequest(image, jobs)
        serial = run_transfer(request, mini_params)
        threaded = run_transfer(request, mini_params, workers=2)
        np.testing.assert_array_equal(serial.image, threaded.image)
        np.testing.assert_array_equal(serial.image, run_transfer(request, mini_params).image)

    def test_failures_are_collected(self, mini_params, scene):
        image, reference = scene
        jobs = (
            self.job(reference, np.zeros((8, 8))),
            self.job(reference, square_mask(8, 2, 2, 4)),
            self.job(reference, np.zeros((8, 8))),
        )
        with pytest.raises(TransferError) as info:
            run_transfer(TransferRequest(image, jobs), mini_params, workers=2)
        assert [index for index, _ in info.value.failures] == [0, 2]
        assert all(isinstance(error, DegenerateMaskError) for _, error in info.value.failures)

    def test_request_validation(self, scene):
        image, reference = scene
        with pytest.raises(ShapeError):
            TransferRequest(image, (self.job(reference, np.ones((4, 4))),))
        with pytest.raises(ContractError):
            TransferRequest(image, (), alignment="sideways")
        with pytest.raises(DegenerateMaskError):
            TransferJob(mask=np.ones((8, 8)), reference=reference, reference_mask=np.zeros((8, 8)))
