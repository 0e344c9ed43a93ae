import numpy as np
import pytest

from thzicl import spectra
from thzicl.phantom import (
    NO_C4,
    YES_C4,
    Disc,
    PhantomSpec,
    Rect,
    annotations_for,
    design_slices,
    generate_phantom,
    write_annotations,
)
from thzicl.volume_io import Domain


def small_spec(**overrides):
    base = dict(
        nf=16,
        nx=16,
        ny=16,
        plate_rect=Rect(1, 1, 6, 14),
        c4_disc=Disc(11, 8, 3),
        band_lo=4,
        band_hi=12,
        peak_frame=8,
        noise_sigma=0.02,
        seed=99,
    )
    base.update(overrides)
    return PhantomSpec(**base)


class TestSpecValidation:
    def test_bad_band(self):
        with pytest.raises(ValueError):
            small_spec(band_lo=12, band_hi=4)

    def test_peak_outside_band(self):
        with pytest.raises(ValueError):
            small_spec(peak_frame=2)

    def test_overlapping_regions(self):
        with pytest.raises(ValueError):
            small_spec(c4_disc=Disc(3, 3, 2))


class TestDesignSlices:
    def test_disc_zero_outside_band(self):
        spec = small_spec(noise_sigma=0.0)
        slices = design_slices(spec)
        disc = spec.c4_disc.mask(spec.nx, spec.ny)
        for f in list(range(0, spec.band_lo)) + list(range(spec.band_hi, spec.nf)):
            assert np.all(slices[f].values[disc] == 0)

    def test_disc_brighter_than_background_at_peak(self):
        spec = small_spec()
        slices = design_slices(spec)
        disc = spec.c4_disc.mask(spec.nx, spec.ny)
        plate = spec.plate_rect.mask(spec.nx, spec.ny)
        background = ~(disc | plate)
        vals = slices[spec.peak_frame].values
        assert np.abs(vals[disc]).mean() > np.abs(vals[background]).mean()

    def test_seeded_determinism(self):
        a = design_slices(small_spec())
        b = design_slices(small_spec())
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.values, sb.values)

    def test_unique_peak(self):
        spec = small_spec(noise_sigma=0.0)
        slices = design_slices(spec)
        disc = spec.c4_disc.mask(spec.nx, spec.ny)
        amps = [np.abs(s.values[disc]).max() for s in slices]
        assert int(np.argmax(amps)) == spec.peak_frame


class TestGeneratePhantom:
    def test_labels_match_band(self):
        spec = small_spec()
        _, ann = generate_phantom(spec)
        labels = [ann.labels[f] for f in range(spec.nf)]
        assert labels == [NO_C4] * 4 + [YES_C4] * 8 + [NO_C4] * 4

    def test_round_trip_to_designed_slices(self):
        spec = small_spec()
        vol, _ = generate_phantom(spec)
        assert vol.domain == Domain.RAW
        designed = design_slices(spec)
        transformed = spectra.transform_volume(vol)
        for f in range(spec.nf):
            got = spectra.extract_slice(transformed, f).values
            want = designed[f].values
            rel = np.linalg.norm(got - want) / np.linalg.norm(want)
            assert rel < 1e-5

    def test_plate_only_when_disc_empty(self):
        # an "empty" disc: zero amplitude leaves only the plate visible
        spec = small_spec(noise_sigma=0.0, c4_amplitude=0.0)
        vol, _ = generate_phantom(spec)
        transformed = spectra.transform_volume(vol)
        plate = spec.plate_rect.mask(spec.nx, spec.ny)
        for f in range(spec.nf):
            vals = np.abs(spectra.extract_slice(transformed, f).values)
            assert vals[plate].min() > vals[~plate].max()

    def test_seeded_determinism(self):
        va, _ = generate_phantom(small_spec())
        vb, _ = generate_phantom(small_spec())
        assert np.array_equal(va.data, vb.data)


def test_annotations_for_default():
    spec = PhantomSpec()
    ann = annotations_for(spec)
    yes = sum(1 for v in ann.labels.values() if v == YES_C4)
    assert yes == spec.band_hi - spec.band_lo
    assert set(ann.labels) == set(range(spec.nf))


def test_write_annotations(tmp_path):
    ann = annotations_for(small_spec())
    path = tmp_path / "ann.csv"
    write_annotations(ann, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "frame,label"
    assert lines[1] == "0,NO_C4"
    assert lines[5] == "4,YES_C4"
    assert len(lines) == 17
