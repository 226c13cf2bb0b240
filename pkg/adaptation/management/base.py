from typing import Iterable, Mapping, Sequence

from django.core.management.base import BaseCommand, CommandError

from adaptation.exceptions import AdaptationError


class AdaptationCommand(BaseCommand):
    """
    Runs ``run(**options)`` and turns framework errors into ``CommandError``
    with the error's exit code: 1 configuration, 2 data, 3 numerical.
    """

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except AdaptationError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError

    def write_records(self, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
        self.stdout.write('\t'.join(header))
        for row in rows:
            self.stdout.write('\t'.join(_cell(value) for value in row))

    def write_mapping(self, values: Mapping[str, object]) -> None:
        self.write_records(list(values), [list(values.values())])


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)
