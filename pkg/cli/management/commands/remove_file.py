"""
Management command to remove a file from the publisher's directory
"""
from cli.base import PublisherCommand


class Command(PublisherCommand):
    help = 'Append REMOVE to a file OP chain; the content stays on chain but no longer resolves'

    def add_command_arguments(self, parser):
        parser.add_argument('directory', help='Directory holding the file')
        parser.add_argument('name', help='File name')

    def run(self, config, **options):
        return self.publish(config, lambda publisher: publisher.remove(options['directory'], options['name']))
