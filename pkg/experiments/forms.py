from django import forms
from django.conf import settings

import numpy as np

from core.exceptions import ModelConstructionError, ScheduleError
from core.utils import as_matrix, as_vector
from plants.presets import CONTINUOUS_PLANTS
from plants.services import DISCRETIZERS, check_positive_definite
from simulation.services import DimSchedule

MODE_CHOICES = [
    ('optimal', 'Optimal MPC'),
    ('tdmpc', 'TD-MPC'),
    ('dimsumpc', 'Dim-SuMPC'),
]

WARM_START_CHOICES = [('truncate', 'Truncate'), ('zero_pad', 'Shift and zero-pad'), ('cold', 'Cold start')]
KAPPA_CHOICES = [('symmetrized', 'sym(G Bbar)'), ('gram', 'Gram form')]
KJ_CHOICES = [('proof', 'h(N_{j-1})'), ('displayed', 'h(N_j)')]
SWITCH_CHOICES = [('offline', 'Offline from x0'), ('online', 'Online at phase entry')]

AUTO_BUDGET = 'auto'
MATCHED_BUDGET = 'matched'


def _matrix_list(value, name):
    try:
        return as_matrix(value, name).tolist()
    except ModelConstructionError as e:
        raise forms.ValidationError(str(e))


def _positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise forms.ValidationError(f"{name} must be a positive integer, got {value!r}")
    return value


def _phase_budget(value, j):
    """One ell, a list with one ell per step, or MATCHED_BUDGET after the first phase."""
    if value == MATCHED_BUDGET:
        if j == 0:
            raise forms.ValidationError("the first schedule phase cannot use a matched budget")
        return value
    if isinstance(value, list):
        if not value:
            raise forms.ValidationError(f"per-step budgets of phase {j} must not be empty")
        return [_positive_int(b, f'phase {j} budget entry') for b in value]
    return _positive_int(value, 'schedule budget')


def _as_schedule(horizons, switch_times, budgets, switch_mode, T=None):
    """DimSchedule with matched budgets stood in by 1, for validation only."""
    stand_in = [1 if b == MATCHED_BUDGET else b for b in budgets]
    schedule = DimSchedule(horizons=tuple(horizons), switch_times=tuple(switch_times),
                           budgets=tuple(stand_in), allow_uncertified=True,
                           switch_mode=switch_mode)
    if T is not None:
        schedule.check_length(T)
    return schedule


class ScenarioConfigForm(forms.Form):
    """
    Validate one scenario config document.

    Nested parts (plant, cost, box, budget, schedule) are JSON values; every
    clean_<field> normalizes its part so that cleaned_data serializes back to
    the same document.
    """
    name = forms.CharField(max_length=100)
    mode = forms.ChoiceField(choices=MODE_CHOICES)
    plant = forms.JSONField()
    cost = forms.JSONField()
    box = forms.JSONField()
    x0 = forms.JSONField()
    T = forms.IntegerField(min_value=1)
    horizon = forms.IntegerField(min_value=1, required=False)
    budget = forms.JSONField(required=False)
    schedule = forms.JSONField(required=False)
    allow_uncertified = forms.BooleanField(required=False)
    seed = forms.IntegerField(min_value=0, required=False)
    solver_tol = forms.FloatField(required=False)
    oracle_tol = forms.FloatField(required=False)
    warm_start = forms.ChoiceField(choices=WARM_START_CHOICES, required=False)
    kappa_mode = forms.ChoiceField(choices=KAPPA_CHOICES, required=False)
    kj_variant = forms.ChoiceField(choices=KJ_CHOICES, required=False)

    def clean_plant(self):
        """continuous preset, continuous matrices (Ac, Bc, Ts) or discrete matrices (A, B)."""
        plant = self.cleaned_data.get('plant')
        if not isinstance(plant, dict):
            raise forms.ValidationError("plant must be an object")
        kind = plant.get('kind', 'continuous')

        if kind == 'discrete':
            A = _matrix_list(plant.get('A'), 'A')
            B = _matrix_list(plant.get('B'), 'B')
            return {'kind': 'discrete', 'A': A, 'B': B}
        if kind != 'continuous':
            raise forms.ValidationError(f"plant kind must be 'continuous' or 'discrete', got '{kind}'")

        Ts = plant.get('Ts')
        if isinstance(Ts, bool) or not isinstance(Ts, (int, float)) or not Ts > 0:
            raise forms.ValidationError(f"plant Ts must be a positive number, got {Ts!r}")
        discretization = plant.get('discretization', settings.TDMPC_DISCRETIZATION)
        if discretization not in DISCRETIZERS:
            raise forms.ValidationError(
                f"plant discretization must be one of {', '.join(DISCRETIZERS)}, got '{discretization}'"
            )

        normalized = {'kind': 'continuous', 'Ts': float(Ts), 'discretization': discretization}
        if 'preset' in plant:
            if plant['preset'] not in CONTINUOUS_PLANTS:
                raise forms.ValidationError(
                    f"unknown plant preset '{plant['preset']}' "
                    f"(choose from {', '.join(CONTINUOUS_PLANTS)})"
                )
            params = plant.get('params', {})
            if not isinstance(params, dict) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
                raise forms.ValidationError("plant params must map names to numbers")
            try:
                CONTINUOUS_PLANTS[plant['preset']](**params)
            except TypeError as e:
                raise forms.ValidationError(f"plant params rejected: {e}")
            normalized['preset'] = plant['preset']
            normalized['params'] = {key: float(value) for key, value in params.items()}
        else:
            normalized['Ac'] = _matrix_list(plant.get('Ac'), 'Ac')
            normalized['Bc'] = _matrix_list(plant.get('Bc'), 'Bc')
        return normalized

    def clean_cost(self):
        cost = self.cleaned_data.get('cost')
        if not isinstance(cost, dict) or 'Q' not in cost or 'R' not in cost:
            raise forms.ValidationError("cost must be an object with Q and R")
        normalized = {}
        for name in ('Q', 'R'):
            try:
                check_positive_definite(as_matrix(cost[name], name), name)
            except ModelConstructionError as e:
                raise forms.ValidationError(f"cost {e}")
            normalized[name] = as_matrix(cost[name], name).tolist()
        return normalized

    def clean_box(self):
        box = self.cleaned_data.get('box')
        if not isinstance(box, dict) or 'lower' not in box or 'upper' not in box:
            raise forms.ValidationError("box must be an object with lower and upper")
        try:
            lower = as_vector(box['lower'], 'lower')
            upper = as_vector(box['upper'], 'upper', lower.size)
        except ModelConstructionError as e:
            raise forms.ValidationError(str(e))
        if np.any(lower > 0) or np.any(upper < 0) or np.any(lower >= upper):
            raise forms.ValidationError("box must satisfy lower <= 0 <= upper and lower < upper")
        return {'lower': lower.tolist(), 'upper': upper.tolist()}

    def clean_x0(self):
        try:
            x0 = as_vector(self.cleaned_data.get('x0'), 'x0')
        except ModelConstructionError as e:
            raise forms.ValidationError(str(e))
        if not np.all(np.isfinite(x0)):
            raise forms.ValidationError("x0 must be finite")
        return x0.tolist()

    def clean_budget(self):
        budget = self.cleaned_data.get('budget')
        if budget is None or budget == AUTO_BUDGET:
            return budget
        if isinstance(budget, list):
            return [_positive_int(b, 'budget entry') for b in budget]
        return _positive_int(budget, 'budget')

    def clean_schedule(self):
        schedule = self.cleaned_data.get('schedule')
        if schedule is None:
            return None
        if not isinstance(schedule, dict) or 'horizons' not in schedule:
            raise forms.ValidationError("schedule must be an object with horizons")
        horizons = [_positive_int(N, 'schedule horizon') for N in schedule['horizons']]
        switch_mode = schedule.get('switch_mode', settings.TDMPC_SWITCH_MODE)
        if switch_mode not in dict(SWITCH_CHOICES):
            raise forms.ValidationError(f"schedule switch_mode '{switch_mode}' is not supported")

        if schedule.get('certified'):
            return {'certified': True, 'horizons': horizons, 'switch_mode': switch_mode}

        switch_times = [_positive_int(k, 'switch time') for k in schedule.get('switch_times', [])]
        budgets = schedule.get('budgets')
        if isinstance(budgets, list):
            budgets = [_phase_budget(b, j) for j, b in enumerate(budgets)]
        else:
            budgets = [_positive_int(budgets, 'schedule budget')] * len(horizons)

        try:
            _as_schedule(horizons, switch_times, budgets, switch_mode)
        except ScheduleError as e:
            raise forms.ValidationError(f"schedule {e}")
        return {
            'certified': False,
            'horizons': horizons,
            'switch_times': switch_times,
            'budgets': budgets,
            'switch_mode': switch_mode,
        }

    def clean_solver_tol(self):
        return self._tolerance('solver_tol', settings.TDMPC_SOLVER_TOL)

    def clean_oracle_tol(self):
        return self._tolerance('oracle_tol', settings.TDMPC_ORACLE_TOL)

    def _tolerance(self, name, default):
        value = self.cleaned_data.get(name)
        if value is None:
            return float(default)
        if not value > 0:
            raise forms.ValidationError(f"{name} must be positive")
        return float(value)

    def clean(self):
        cleaned_data = super().clean()
        if self.errors:
            return cleaned_data

        cleaned_data['allow_uncertified'] = bool(cleaned_data.get('allow_uncertified'))
        if cleaned_data.get('seed') is None:
            cleaned_data['seed'] = settings.TDMPC_DEFAULT_SEED
        cleaned_data['warm_start'] = cleaned_data.get('warm_start') or settings.TDMPC_WARM_START
        cleaned_data['kappa_mode'] = cleaned_data.get('kappa_mode') or settings.TDMPC_KAPPA_MODE
        cleaned_data['kj_variant'] = cleaned_data.get('kj_variant') or settings.TDMPC_KJ_VARIANT

        plant = cleaned_data['plant']
        if plant['kind'] == 'discrete':
            n, m = len(plant['A']), len(plant['B'][0])
        elif 'preset' in plant:
            Ac, Bc = CONTINUOUS_PLANTS[plant['preset']](**plant['params'])
            n, m = Ac.shape[0], Bc.shape[1]
        else:
            n, m = len(plant['Ac']), len(plant['Bc'][0])

        if len(cleaned_data['x0']) != n:
            self.add_error('x0', f"x0 must have n={n} entries, got {len(cleaned_data['x0'])}")
        if np.shape(cleaned_data['cost']['Q']) != (n, n):
            self.add_error('cost', f"Q must be {n}x{n}")
        if np.shape(cleaned_data['cost']['R']) != (m, m):
            self.add_error('cost', f"R must be {m}x{m}")
        if len(cleaned_data['box']['lower']) != m:
            self.add_error('box', f"box bounds must have m={m} entries")

        mode = cleaned_data['mode']
        if mode in ('optimal', 'tdmpc') and cleaned_data.get('horizon') is None:
            self.add_error('horizon', f"horizon is required for mode '{mode}'")
        if mode == 'tdmpc':
            budget = cleaned_data.get('budget')
            if budget is None:
                self.add_error('budget', "budget is required for mode 'tdmpc'")
            elif isinstance(budget, list) and len(budget) != cleaned_data['T']:
                self.add_error('budget', f"budget list must have T={cleaned_data['T']} entries")
        schedule = cleaned_data.get('schedule')
        if mode == 'dimsumpc' and schedule is None:
            self.add_error('schedule', "schedule is required for mode 'dimsumpc'")
        elif mode == 'dimsumpc' and not schedule['certified']:
            try:
                _as_schedule(schedule['horizons'], schedule['switch_times'], schedule['budgets'],
                             schedule['switch_mode'], T=cleaned_data['T'])
            except ScheduleError as e:
                self.add_error('schedule', f"schedule {e}")
        return cleaned_data

    def normalized(self) -> dict:
        """The validated config as a plain JSON document."""
        document = {key: self.cleaned_data.get(key) for key in self.fields}
        return {key: value for key, value in document.items() if value is not None}
