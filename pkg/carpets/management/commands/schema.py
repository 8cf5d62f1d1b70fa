import json

from carpets.cli import CarpetCommand
from carpets.reports import report_schema


class Command(CarpetCommand):
    help = 'Print the report schema and the result keys of every subcommand'
    command_name = 'schema'
    show_table = False

    def add_arguments(self, parser):
        self.add_common_arguments(parser)

    def run(self, report, **options):
        schema = report_schema()
        report.results.update(schema)
        self.stdout.write(json.dumps(schema, indent=2))
