"""Forms validating the blocks of a JSON run-config."""

import math

from django import forms
from django.conf import settings

from .disturbances import make_disturbance
from .exceptions import ModelError
from .models import Comparison, ModelFamily, RefinementStrategy


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise forms.ValidationError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise forms.ValidationError(f"{what} must be finite")
    return float(value)


def _vector(value, what: str, length: int | None = None) -> list[float]:
    if not isinstance(value, list) or not value:
        raise forms.ValidationError(f"{what} must be a nonempty list of numbers")
    if length is not None and len(value) != length:
        raise forms.ValidationError(f"{what} must have {length} entries")
    return [_number(v, what) for v in value]


class ModelBlockForm(forms.Form):
    family = forms.ChoiceField(choices=ModelFamily.choices)
    parameters = forms.JSONField(required=False)
    domain = forms.JSONField()
    disturbance = forms.JSONField()
    boundary_clipping = forms.NullBooleanField(required=False)

    def clean_parameters(self):
        parameters = self.cleaned_data.get("parameters") or {}
        if not isinstance(parameters, dict):
            raise forms.ValidationError("parameters must be an object")
        return parameters

    def clean_domain(self):
        """A list of [lo, hi] intervals with lo < hi."""
        domain = self.cleaned_data.get("domain")
        if not isinstance(domain, list) or not domain:
            raise forms.ValidationError("domain must be a list of [lo, hi] pairs")
        intervals = []
        for interval in domain:
            lo, hi = _vector(interval, "domain interval", 2)
            if not lo < hi:
                raise forms.ValidationError(f"domain interval [{lo}, {hi}] is empty")
            intervals.append((lo, hi))
        return intervals

    def clean_disturbance(self):
        blocks = self.cleaned_data.get("disturbance")
        if not isinstance(blocks, list) or not blocks:
            raise forms.ValidationError(
                "disturbance must list one object per dimension"
            )
        for block in blocks:
            if not isinstance(block, dict):
                raise forms.ValidationError("each disturbance entry must be an object")
            try:
                make_disturbance(block)
            except ModelError as exc:
                raise forms.ValidationError(str(exc)) from exc
        return blocks

    def clean_boundary_clipping(self):
        value = self.cleaned_data.get("boundary_clipping")
        return True if value is None else value

    def clean(self):
        cleaned = super().clean()
        domain, disturbance = cleaned.get("domain"), cleaned.get("disturbance")
        if domain and disturbance and len(domain) != len(disturbance):
            raise forms.ValidationError(
                f"{len(disturbance)} disturbance components for a "
                f"{len(domain)}-dimensional domain"
            )
        return cleaned


class LabelsForm(forms.Form):
    regions = forms.JSONField(required=False)

    def clean_regions(self):
        regions = self.cleaned_data.get("regions") or []
        if not isinstance(regions, list):
            raise forms.ValidationError("labels must be a list of regions")
        cleaned = []
        for region in regions:
            if not isinstance(region, dict):
                raise forms.ValidationError("each label region must be an object")
            lower = _vector(region.get("lower"), "region lower")
            upper = _vector(region.get("upper"), "region upper", len(lower))
            props = region.get("props", [])
            if not isinstance(props, list) or not all(
                isinstance(p, str) for p in props
            ):
                raise forms.ValidationError("region props must be a list of names")
            cleaned.append(
                {"lower": lower, "upper": upper, "props": sorted(set(props))}
            )
        return cleaned


class PartitionForm(forms.Form):
    grid = forms.JSONField()

    def clean_grid(self):
        grid = self.cleaned_data.get("grid")
        if (
            not isinstance(grid, list)
            or not grid
            or not all(
                isinstance(n, int) and not isinstance(n, bool) and n >= 1
                for n in grid
            )
        ):
            raise forms.ValidationError("grid must be a list of positive integers")
        return grid


class SpecForm(forms.Form):
    dra = forms.CharField()
    comparison = forms.ChoiceField(choices=Comparison.choices)
    p_sat = forms.FloatField(min_value=0.0, max_value=1.0)


class RefinementForm(forms.Form):
    v_stop = forms.FloatField(min_value=0.0, max_value=1.0)
    max_rounds = forms.IntegerField(min_value=0)
    max_cells = forms.IntegerField(min_value=1)
    strategy = forms.ChoiceField(choices=RefinementStrategy.choices)

    @classmethod
    def defaults(cls) -> dict:
        return {
            "v_stop": 0.1,
            "max_rounds": 20,
            "max_cells": 5000,
            "strategy": RefinementStrategy.SCORED.value,
        }


class NumericsForm(forms.Form):
    tol = forms.FloatField()
    max_iters = forms.IntegerField(min_value=1)
    p_stop = forms.FloatField()
    theta = forms.FloatField()
    seed = forms.IntegerField(min_value=0)
    threads = forms.IntegerField(min_value=0)

    @classmethod
    def defaults(cls) -> dict:
        return {
            "tol": settings.IMCV_TOL,
            "max_iters": settings.IMCV_MAX_ITERS,
            "p_stop": settings.IMCV_P_STOP,
            "theta": settings.IMCV_THETA,
            "seed": settings.IMCV_SEED,
            "threads": settings.IMCV_THREADS,
        }

    def clean_tol(self):
        tol = self.cleaned_data["tol"]
        if not 0 < tol < 1:
            raise forms.ValidationError("tol must lie in (0, 1)")
        return tol

    def clean_p_stop(self):
        p_stop = self.cleaned_data["p_stop"]
        if not 0 < p_stop < 1:
            raise forms.ValidationError("p_stop must lie in (0, 1)")
        return p_stop

    def clean_theta(self):
        theta = self.cleaned_data["theta"]
        if not 0 < theta <= 1:
            raise forms.ValidationError("theta must lie in (0, 1]")
        return theta


class OutputForm(forms.Form):
    out_dir = forms.CharField()
    plot = forms.NullBooleanField(required=False)

    @classmethod
    def defaults(cls) -> dict:
        return {"out_dir": "out", "plot": True}

    def clean_plot(self):
        value = self.cleaned_data.get("plot")
        return True if value is None else value


class SimulateForm(forms.Form):
    x0 = forms.JSONField()
    horizon = forms.IntegerField(min_value=0)
    n_traj = forms.IntegerField(min_value=1)

    @classmethod
    def defaults(cls) -> dict:
        return {"horizon": 100, "n_traj": 1}

    def clean_x0(self):
        return _vector(self.cleaned_data.get("x0"), "x0")
