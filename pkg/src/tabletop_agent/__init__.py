"""LLM planner/executor agents for tabletop pick-and-place, with a simulated
robot, an action-script language, a benchmark corpus and a scoring harness."""

from .actions import ActionDispatcher, HttpDispatcher, LocalDispatcher
from .corpus import Corpus, TaskInstance, load_corpus, validate_corpus
from .executor_cap import CapExecutor
from .executor_tap import TapConfig, TapExecutor
from .judge import JudgeVerdict, aggregate, judge_verdict, oracle_judge
from .llm import ChatEndpoint, ChatMessage, EndpointConfig, MockEndpoint
from .planner import PlannerConfig, TaskTrace, run_task
from .report import score_counts, success_rate
from .runner import RunConfig, TaskResult, run_benchmark
from .script import parse_script, run_script
from .world import Pose, World, load_environment

__version__ = "0.1.0"

__all__ = [
    "ActionDispatcher", "CapExecutor", "ChatEndpoint", "ChatMessage", "Corpus", "EndpointConfig",
    "HttpDispatcher", "JudgeVerdict", "LocalDispatcher", "MockEndpoint", "PlannerConfig", "Pose",
    "RunConfig", "TapConfig", "TapExecutor", "TaskInstance", "TaskResult", "TaskTrace", "World",
    "aggregate", "judge_verdict", "load_corpus", "load_environment", "oracle_judge", "parse_script",
    "run_benchmark", "run_script", "run_task", "score_counts", "success_rate", "validate_corpus",
]
