import sys
import logging

from typing import Dict, List, Any, Type

logger = logging.getLogger(__name__)


class OscAuditError(Exception):
    """
    Base class for every error raised by the numerical modules
    """
    kind = 'OscAuditError'
    exit_code = 2

    def __init__(self, message: str, **details: Any) -> None:
        """
        Initialize error
        :param message: one-line description
        :param details: extra values serialized with the error
        """
        super().__init__(message)
        self.message, self.details = message, details

    def to_dict(self) -> Dict[str, Any]:
        """
        Serialize error for the report
        :return: Dictionary with kind, message and details
        """
        return {'kind': self.kind, 'message': self.message, 'details': dict(self.details)}


class UsageError(OscAuditError):
    kind, exit_code = 'UsageError', 1


class NonConvergence(OscAuditError):
    kind = 'NonConvergence'


class DegenerateIsotropic(OscAuditError):
    kind = 'DegenerateIsotropic'


class NotOrthogonal(OscAuditError):
    kind = 'NotOrthogonal'


class DegenerateCoupling(OscAuditError):
    kind = 'DegenerateCoupling'


class NonPositiveMass(OscAuditError):
    kind = 'NonPositiveMass'


class StepTooLarge(OscAuditError):
    kind = 'StepTooLarge'


class EigenbasisDiscontinuity(OscAuditError):
    kind = 'EigenbasisDiscontinuity'


ERROR_KINDS: Dict[str, Type[OscAuditError]] = {
    cls.kind: cls for cls in (UsageError, NonConvergence, DegenerateIsotropic, NotOrthogonal, DegenerateCoupling,
                              NonPositiveMass, StepTooLarge, EigenbasisDiscontinuity)
}


def error_from_dict(record: Dict[str, Any]) -> OscAuditError:
    """
    Rebuild an error from its report record
    :param record: dictionary produced by OscAuditError.to_dict
    :return: Error instance of the recorded kind
    """
    cls = ERROR_KINDS.get(record['kind'], OscAuditError)
    return cls(record['message'], **record.get('details', {}))


class Base:
    """
    Base class handling errors and messages
    """
    def __init__(self):
        self.has_errors, self.messages, self.errors = False, [], []

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.has_errors:
            self.show_status()

    def add_error(self, error: OscAuditError, context: str = '') -> None:
        """
        Record an error raised by an inner module
        :param error: the error
        :param context: where it happened (sample index, step time...)
        :return: None
        """
        self.has_errors = True
        self.errors.append(error.to_dict() | ({'context': context} if context else {}))
        self.messages.append({'type': 'ERROR', 'text': f'{context} {error.kind}: {error.message}'.strip()})
        logger.debug('recorded %s %s', error.kind, context)

    def add_information(self, info: List[str] | str) -> None:
        """
        Add information to messages
        :param info: string or list of string messages
        :return: None
        """
        for line in ([info] if isinstance(info, str) else info):
            self.messages.append({'type': 'INFO', 'text': line.replace('\n', ' ')})

    def show_status(self, stream=None) -> None:
        """
        Echo messages on stderr
        :param stream: output stream, stderr by default
        :return: None
        """
        if self.messages:
            print('\n'.join([f'{msg["type"]} : {msg["text"]}' for msg in self.messages]), file=stream or sys.stderr)
