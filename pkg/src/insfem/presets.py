"""Ready-made input files for the lid-driven cavity and the conical diffuser."""

from __future__ import annotations

from .inputdsl.builder import load_simulation
from .runner import run_simulation

CAVITY_TEMPLATE = """\
# Lid-driven cavity with a regularized lid u = 4x(1-x)
mu = {mu}
rho = 1

[GlobalParams]
  u = vel_x
  v = vel_y
  p = p
  supg = {supg}
  pspg = true
  convective_term = {convective}
  integrate_p_by_parts = true
  transient_term = true
  laplace = true
[]

[Mesh]
  type = GeneratedMesh
  dim = 2
  nx = {n}
  ny = {n}
  elem_type = QUAD4
  [./corner]
    type = ExtraNodeset
    new_boundary = pinned_node
    coord = '0 0'
  [../]
[]

[Variables]
  [./vel_x]
  [../]
  [./vel_y]
  [../]
  [./p]
  [../]
[]

[Functions]
  [./lid]
    type = ParsedFunction
    value = '4*x*(1-x)'
  [../]
[]

[Materials]
  [./const]
    type = GenericConstantMaterial
    prop_names = 'rho mu'
    prop_values = '${{rho}} ${{mu}}'
  [../]
[]

[Kernels]
  [./mass]
    type = INSMass
    variable = p
  [../]
  [./x_time]
    type = INSMomentumTimeDerivative
    variable = vel_x
  [../]
  [./y_time]
    type = INSMomentumTimeDerivative
    variable = vel_y
  [../]
  [./x_momentum_space]
    type = INSMomentumLaplaceForm
    variable = vel_x
    component = 0
  [../]
  [./y_momentum_space]
    type = INSMomentumLaplaceForm
    variable = vel_y
    component = 1
  [../]
[]

[BCs]
  [./x_no_slip]
    type = DirichletBC
    variable = vel_x
    boundary = 'bottom right left'
    value = 0
  [../]
  [./lid]
    type = FunctionDirichletBC
    variable = vel_x
    boundary = top
    function = lid
  [../]
  [./y_no_slip]
    type = DirichletBC
    variable = vel_y
    boundary = 'bottom right top left'
    value = 0
  [../]
  [./pressure_pin]
    type = DirichletBC
    variable = p
    boundary = pinned_node
    value = 0
  [../]
[]

[Postprocessors]
  [./max_u]
    type = NodalExtremeValue
    variable = vel_x
    value_type = max
  [../]
  [./min_u]
    type = NodalExtremeValue
    variable = vel_x
    value_type = min
  [../]
[]

[Executioner]
  type = Transient
  num_steps = {num_steps}
  trans_ss_check = true
  ss_check_tol = 1e-10
  dtmin = 1e-5
  dt = {dt}
  [./TimeStepper]
    type = IterationAdaptiveDT
    dt = {dt}
    cutback_factor = 0.4
    growth_factor = {growth}
    optimal_iterations = 5
  [../]
  nl_rel_tol = 1e-10
  nl_abs_tol = 1e-11
  nl_max_its = 15
  petsc_options_iname = '-pc_type'
  petsc_options_value = 'lu'
[]

[Outputs]
  file_base = {basename}
  interval = {interval}
[]
"""


CONE_TEMPLATE = """\
# Axisymmetric conical diffuser, inlet profile u_z = 1 - 4 r^2
mu = {mu}
rho = 1

[GlobalParams]
  u = vel_x
  v = vel_y
  p = p
  supg = {stabilized}
  pspg = {stabilized}
  convective_term = true
  integrate_p_by_parts = true
  transient_term = {transient}
  laplace = true
[]

[Problem]
  coord_type = RZ
[]

[Mesh]
  type = ConicalDiffuserMesh
  nr = {nr}
  nz_cone = {nz_cone}
  nz_pipe = {nz_pipe}
  elem_type = {elem_type}
[]

[Variables]
  [./vel_x]
    order = {vel_order}
  [../]
  [./vel_y]
    order = {vel_order}
  [../]
  [./p]
  [../]
[]

[Functions]
  [./inlet_func]
    type = ParsedFunction
    value = '1 - 4*x^2'
  [../]
[]

[Materials]
  [./const]
    type = GenericConstantMaterial
    prop_names = 'rho mu'
    prop_values = '${{rho}} ${{mu}}'
  [../]
[]

[Kernels]
  [./mass]
    type = INSMassRZ
    variable = p
  [../]
{time_kernels}  [./x_momentum_space]
    type = INSMomentumLaplaceFormRZ
    variable = vel_x
    component = 0
  [../]
  [./y_momentum_space]
    type = INSMomentumLaplaceFormRZ
    variable = vel_y
    component = 1
  [../]
[]

[BCs]
  [./u_r_zero]
    type = DirichletBC
    variable = vel_x
    boundary = 'inlet wall axis'
    value = 0
  [../]
  [./u_z_wall]
    type = DirichletBC
    variable = vel_y
    boundary = wall
    value = 0
  [../]
  [./u_z_inlet]
    type = FunctionDirichletBC
    variable = vel_y
    boundary = inlet
    function = inlet_func
  [../]
[]

[Postprocessors]
  [./flow_in]
    type = VolumetricFlowRate
    boundary = inlet
  [../]
  [./flow_out]
    type = VolumetricFlowRate
    boundary = outlet
  [../]
  [./min_uz]
    type = NodalExtremeValue
    variable = vel_y
    value_type = min
  [../]
[]

[Executioner]
  type = {executioner}
{transient_block}  nl_rel_tol = 1e-12
  nl_abs_tol = 1e-12
  nl_max_its = 20
  petsc_options_iname = '-pc_type'
  petsc_options_value = 'lu'
[]

[Outputs]
  file_base = {basename}
[]
"""

_TIME_KERNELS = """\
  [./x_time]
    type = INSMomentumTimeDerivative
    variable = vel_x
  [../]
  [./y_time]
    type = INSMomentumTimeDerivative
    variable = vel_y
  [../]
"""

_TRANSIENT_BLOCK = """\
  num_steps = {num_steps}
  trans_ss_check = true
  ss_check_tol = {ss_tol}
  dt = {dt}
  dtmin = 1e-6
  [./TimeStepper]
    type = IterationAdaptiveDT
    dt = {dt}
    cutback_factor = 0.4
    growth_factor = 1.5
    optimal_iterations = 5
  [../]
"""


def cavity_input(Re=1000.0, n=64, stokes=False, num_steps=200, dt=0.01, growth=1.5, basename=None, interval=1000):
    """Input text for the cavity.

    ``stokes`` drops the convective term and SUPG; SUPG weights the residual
    by ``U . grad(phi)`` and would break the reflection symmetry of Stokes flow.
    """
    mu = 1.0 / Re
    flag = "false" if stokes else "true"
    return CAVITY_TEMPLATE.format(mu=repr(mu), n=int(n), convective=flag, supg=flag,
                                  num_steps=int(num_steps), dt=repr(dt), growth=repr(growth),
                                  basename=basename or f"cavity_re{Re:g}", interval=int(interval))


def cone_input(Re=0.5, nr=8, nz_cone=8, nz_pipe=24, basename=None, num_steps=200, dt=0.05):
    """Input text for the diffuser.

    ``Re`` is based on the mean inlet velocity 1/2 and the inlet diameter 1,
    so ``mu = 0.5 / Re``.  Creeping flow (``Re < 1``) uses unstabilized P2P1
    and a steady solve; otherwise P1P1 with SUPG and PSPG is marched to steady
    state.
    """
    creeping = Re < 1.0
    mu = 0.5 / Re
    common = dict(mu=repr(mu), nr=int(nr), nz_cone=int(nz_cone), nz_pipe=int(nz_pipe),
                  basename=basename or f"cone_re{Re:g}")
    if creeping:
        return CONE_TEMPLATE.format(stabilized="false", transient="false", elem_type="TRI6", vel_order="SECOND",
                                    time_kernels="", executioner="Steady", transient_block="", **common)
    block = _TRANSIENT_BLOCK.format(num_steps=int(num_steps), ss_tol="1e-8", dt=repr(dt))
    return CONE_TEMPLATE.format(stabilized="true", transient="true", elem_type="TRI3", vel_order="FIRST",
                                time_kernels=_TIME_KERNELS, executioner="Transient", transient_block=block, **common)


def run_case_lid_cavity(Re=1000.0, n=64, stokes=False, output_dir=None, write=False, **kw):
    spec = load_simulation(cavity_input(Re, n, stokes, **kw), "cavity.i")
    return spec, run_simulation(spec, output_dir, write)


def run_case_axisymmetric_cone(Re=0.5, output_dir=None, write=False, **kw):
    spec = load_simulation(cone_input(Re, **kw), "cone.i")
    return spec, run_simulation(spec, output_dir, write)
