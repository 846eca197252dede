from src.deepc.controller import DeepcController, deepc_step, extract_command, formulate_deepc_qp
from src.deepc.forecast import perturb_forecast, sigma2_for_snr, snr_of
from src.deepc.hankel import assemble_hankel_set, build_hankel, is_persistently_exciting
from src.deepc.qp import solve_qp
from src.deepc.views import ControlCommand, DeepcParams, HankelSet, QProblem, QSolution, SignalSeries, SolveStatus
