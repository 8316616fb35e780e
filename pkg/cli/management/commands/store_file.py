"""
Management command to store a local file in the publisher's directory
"""
from pathlib import Path

from cli.base import PublisherCommand


class Command(PublisherCommand):
    help = 'Write a file on the simulated chain and record it in a directory (an existing name is updated)'

    def add_command_arguments(self, parser):
        parser.add_argument('directory', help='Target directory, e.g. /news')
        parser.add_argument('file', help='Local file to store')
        parser.add_argument('--name', help='File name in the directory (default: the local file name)')
        parser.add_argument('--no-create', action='store_true', help='Fail if the directory does not exist')
        parser.add_argument('--manifest', help='Also write the construct manifest to this path')

    def run(self, config, **options):
        source = Path(options['file'])
        data = source.read_bytes()
        name = options['name'] or source.name
        result = self.publish(
            config,
            lambda publisher: publisher.store(options['directory'], name, data, create=not options['no_create']),
            options['manifest'],
        )
        result['size'] = len(data)
        return result
