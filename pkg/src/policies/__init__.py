from src.policies.policy import POLICY_REGISTRY, Policy, PolicyContext, PolicyKind, build_policy, register_policy
