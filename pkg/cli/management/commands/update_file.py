"""
Management command to replace the content of a stored file
"""
from pathlib import Path

from cli.base import PublisherCommand


class Command(PublisherCommand):
    help = "Write new content for an existing file and append UPDATE to its OP chain"

    def add_command_arguments(self, parser):
        parser.add_argument('directory', help='Directory holding the file')
        parser.add_argument('name', help='File name')
        parser.add_argument('file', help='Local file with the new content')
        parser.add_argument('--manifest', help='Also write the construct manifest to this path')

    def run(self, config, **options):
        data = Path(options['file']).read_bytes()
        result = self.publish(
            config,
            lambda publisher: publisher.update(options['directory'], options['name'], data),
            options['manifest'],
        )
        result['size'] = len(data)
        return result
