from django import forms
from django.core.exceptions import ValidationError

from . import ac_bridge
from .exceptions import ParameterError
from .iab import VARIANCE_MODES
from .threshold_policies import VARIANTS

FORMAT_CHOICES = [('csv', 'csv'), ('json', 'json')]
POLICY_CHOICES = [(name, name) for name in ('optimal', *VARIANTS)]
FIELD_CHOICES = [(name, name) for name in ('constant', *VARIANTS)]
MODE_CHOICES = [(mode, mode) for mode in VARIANCE_MODES]
U64_MAX = 2 ** 64 - 1


class ListField(forms.Field):
    """A list from YAML, or a comma separated string from a flag."""

    item_type = str

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if isinstance(value, str):
            value = [v for v in (part.strip() for part in value.split(',')) if v]
        try:
            return [self.item_type(v) for v in value]
        except (TypeError, ValueError):
            raise ValidationError(f"expected a list of {self.item_type.__name__} values") from None


class IntegerListField(ListField):
    item_type = int


class FloatListField(ListField):
    item_type = float


class ChoiceListField(ListField):

    def __init__(self, *, choices, **kwargs):
        super().__init__(**kwargs)
        self.choices = tuple(choices)

    def validate(self, value):
        super().validate(value)
        unknown = [v for v in value if v not in self.choices]
        if unknown:
            raise ValidationError(f"unknown choice(s): {', '.join(unknown)}")


class RunForm(forms.Form):
    seed = forms.IntegerField(min_value=0, max_value=U64_MAX)
    out = forms.CharField()
    threads = forms.IntegerField(min_value=1)
    format = forms.ChoiceField(choices=FORMAT_CHOICES)
    block_size = forms.IntegerField(min_value=1)


class CalibrationForm(forms.Form):
    tau_unconstrained = forms.FloatField(min_value=1e-9)
    tau_constrained = forms.FloatField(min_value=1e-9)
    lambda_iterations = forms.IntegerField(min_value=1)
    border_width = forms.FloatField(min_value=0.0, max_value=0.5)


class GainModelForm(forms.Form):
    scale_G = forms.FloatField(min_value=0.0)
    model = forms.CharField(required=False, help_text="JSON gain model written by an earlier run")
    samples = forms.CharField(required=False, help_text="CSV of signal,price_change rows")

    def clean(self):
        cleaned = super().clean()
        if cleaned.get('model') and cleaned.get('samples'):
            raise ValidationError("give either a gain model file or a samples file, not both")
        return cleaned


def _check_target(form, cleaned):
    N, Q_star = cleaned.get('N'), cleaned.get('Q_star')
    if N is not None and Q_star is not None and Q_star > N:
        form.add_error('Q_star', f"cannot buy Q*={Q_star} shares in N={N} opportunities")


class DPSolveForm(RunForm, GainModelForm):
    N = forms.IntegerField(min_value=1)
    Q_star = forms.IntegerField(min_value=1)

    def clean(self):
        cleaned = super().clean()
        _check_target(self, cleaned)
        return cleaned


class PolicyEvalForm(DPSolveForm, CalibrationForm):
    variant = forms.ChoiceField(choices=POLICY_CHOICES)


class PerfCompareForm(RunForm, GainModelForm, CalibrationForm):
    N = forms.IntegerField(min_value=2)
    q_min = forms.IntegerField(min_value=1, required=False)
    q_max = forms.IntegerField(min_value=1, required=False)
    variants = ChoiceListField(choices=VARIANTS, required=False)

    def clean(self):
        cleaned = super().clean()
        N = cleaned.get('N')
        if N is None:
            return cleaned
        cleaned['q_min'] = cleaned.get('q_min') or 1
        cleaned['q_max'] = cleaned.get('q_max') or N - 1
        if cleaned['q_max'] > N:
            self.add_error('q_max', f"Q* cannot exceed N={N}")
        if cleaned['q_min'] > cleaned['q_max']:
            self.add_error('q_min', "empty Q* range")
        cleaned['variants'] = cleaned.get('variants') or list(VARIANTS)
        return cleaned


class SimulateForm(RunForm, GainModelForm, CalibrationForm):
    N = forms.IntegerField(min_value=1)
    Q_star = forms.IntegerField(min_value=1)
    variant = forms.ChoiceField(choices=POLICY_CHOICES)
    noise_std = forms.FloatField(min_value=0.0)
    P0 = forms.FloatField()
    paths = forms.IntegerField(min_value=1)
    force_boundary = forms.BooleanField(required=False)
    checkpoints = IntegerListField(required=False)

    def clean(self):
        cleaned = super().clean()
        _check_target(self, cleaned)
        N = cleaned.get('N')
        if N is not None and any(not 0 <= c <= N for c in cleaned.get('checkpoints') or []):
            self.add_error('checkpoints', f"checkpoints must lie in [0, {N}]")
        return cleaned


class IABVerifyForm(RunForm, CalibrationForm):
    N = forms.IntegerField(min_value=2)
    paths = forms.IntegerField(min_value=2)
    field_kind = forms.ChoiceField(choices=FIELD_CHOICES)
    p = forms.FloatField(min_value=0.0, max_value=1.0)
    q_star = forms.FloatField(min_value=0.0, max_value=1.0)
    mode = forms.ChoiceField(choices=MODE_CHOICES)
    checkpoints = IntegerListField(required=False)
    euler_paths = forms.IntegerField(min_value=0)

    def clean(self):
        cleaned = super().clean()
        N = cleaned.get('N')
        if N is not None and any(not 0 < c <= N for c in cleaned.get('checkpoints') or []):
            self.add_error('checkpoints', f"checkpoints must lie in (0, {N}]")
        return cleaned


class ACBandsForm(RunForm):
    T = forms.FloatField(min_value=0.0)
    Q_star = forms.FloatField(min_value=0.0)
    sigma = forms.FloatField(min_value=0.0)
    eta = forms.FloatField(min_value=0.0)
    gamma_perm = forms.FloatField(min_value=0.0)
    lambda_risk = forms.FloatField(min_value=0.0)
    tau = forms.FloatField(min_value=0.0)
    u = forms.FloatField(min_value=0.0)
    paths = forms.IntegerField(min_value=0)
    speeds = FloatListField(required=False)

    def clean(self):
        cleaned = super().clean()
        if self.errors:
            return cleaned
        try:
            params = ac_bridge.ACParams(**{k: cleaned[k] for k in (
                'T', 'Q_star', 'sigma', 'eta', 'gamma_perm', 'lambda_risk', 'tau', 'u')})
            ac_bridge.compute_kappas(params)
        except ParameterError as exc:
            raise ValidationError(str(exc)) from exc
        speeds = cleaned.get('speeds')
        if speeds and len(speeds) != params.intervals:
            self.add_error('speeds', f"need one speed per interval ({params.intervals})")
        return cleaned


class CalibrateForm(RunForm):
    lambda_iterations = forms.IntegerField(min_value=1)


def error_lines(form):
    """`field: message` lines for every validation error."""
    for name, messages in form.errors.items():
        label = 'config' if name == '__all__' else name
        for message in messages:
            yield f"{label}: {message}"
